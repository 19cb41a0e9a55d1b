#include "mmshap/dataset.hpp"

#include <fstream>
#include <set>

#include "mmshap/error.hpp"

namespace mmshap {

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
    throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what, line);
}

std::string required_string(const nlohmann::json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) parse_error(line, std::string("missing \"") + key + "\"");
    if (!j[key].is_string()) parse_error(line, std::string("\"") + key + "\" must be a string");
    return j[key].get<std::string>();
}

}  // namespace

DatasetRecord parse_record(const std::string& line, std::size_t line_number) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        parse_error(line_number, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) parse_error(line_number, "record is not a JSON object");

    DatasetRecord rec;
    rec.line = line_number;
    rec.id = required_string(j, "id", line_number);
    rec.image = required_string(j, "image", line_number);
    rec.caption = required_string(j, "caption", line_number);
    if (rec.id.empty()) parse_error(line_number, "\"id\" is empty");
    if (j.contains("foil") && !j["foil"].is_null()) rec.foil = required_string(j, "foil", line_number);
    if (j.contains("task")) {
        rec.task = required_string(j, "task", line_number);
        if (rec.task != "isa" && rec.task != "vqa") {
            parse_error(line_number, "\"task\" must be \"isa\" or \"vqa\"");
        }
    }
    if (rec.task == "vqa" && rec.foil) parse_error(line_number, "vqa records cannot carry a foil");
    if (j.contains("correct") && !j["correct"].is_null()) {
        if (!j["correct"].is_boolean()) parse_error(line_number, "\"correct\" must be a boolean");
        rec.correct = j["correct"].get<bool>();
    }
    for (const char* key : {"width", "height"}) {
        if (!j.contains(key) || j[key].is_null()) continue;
        if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
            parse_error(line_number, std::string("\"") + key + "\" must be a positive integer");
        }
        (std::string(key) == "width" ? rec.width : rec.height) = j[key].get<std::int64_t>();
    }
    return rec;
}

std::vector<DatasetRecord> ingest(const std::filesystem::path& dataset_path) {
    std::ifstream in(dataset_path);
    if (!in) throw Error(Errc::FileNotFound, "dataset '" + dataset_path.string() + "' not found");
    std::vector<DatasetRecord> records;
    std::set<std::string> ids;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        DatasetRecord rec = parse_record(line, number);
        if (!ids.insert(rec.id).second) parse_error(number, "duplicate id '" + rec.id + "'");
        records.push_back(std::move(rec));
    }
    return records;
}

nlohmann::json record_to_json(const DatasetRecord& r) {
    nlohmann::json j{{"id", r.id}, {"image", r.image}, {"caption", r.caption}, {"task", r.task}};
    if (r.foil) j["foil"] = *r.foil;
    if (r.correct) j["correct"] = *r.correct;
    if (r.width) j["width"] = *r.width;
    if (r.height) j["height"] = *r.height;
    return j;
}

}  // namespace mmshap
