#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmshap {

/// One JSONL dataset line:
///   {"id": str, "image": path-or-base64, "caption": str, "foil": str?,
///    "task": "isa"|"vqa", "correct": bool?, "width": int?, "height": int?}
/// width/height are optional hints used when the image header cannot be read.
struct DatasetRecord {
    std::string id;
    std::string image;
    std::string caption;
    std::optional<std::string> foil;
    std::string task = "isa";
    std::optional<bool> correct;
    std::optional<std::int64_t> width;
    std::optional<std::int64_t> height;
    std::size_t line = 0;

    bool operator==(const DatasetRecord&) const = default;
};

/// Throws FileNotFound, or ParseError carrying the 1-based line number.
/// Blank lines are skipped; ids must be unique.
std::vector<DatasetRecord> ingest(const std::filesystem::path& dataset_path);

DatasetRecord parse_record(const std::string& line, std::size_t line_number);
nlohmann::json record_to_json(const DatasetRecord& record);

}  // namespace mmshap
