#pragma once

// Report writers shared by the commands. Numbers are written in their
// shortest round-trip form so outputs are byte-stable across runs.

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace grasslens::cli::report {

inline constexpr int kSchemaVersion = 1;

std::string number(double v);
std::string number(const std::optional<double>& v);  // empty cell when undefined

/// Finite double or null.
nlohmann::json value(double v);
nlohmann::json value(const std::optional<double>& v);
nlohmann::json array(const std::vector<double>& v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v) { return cell(number(v)); }
    CsvWriter& cell(const std::optional<double>& v) { return cell(number(v)); }
    CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(bool v) { return cell(std::string(v ? "1" : "0")); }
    void end_row();
    void close();
    ~CsvWriter();

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::vector<std::string> row_;
    bool closed_ = false;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// JSON warnings on stderr, one object per line.
void warn(const std::string& message);

}  // namespace grasslens::cli::report
