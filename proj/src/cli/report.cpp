#include "report.hpp"

#include "grasslens/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>

namespace grasslens::cli::report {

std::string number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

nlohmann::json value(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json value(const std::optional<double>& v) { return v ? value(*v) : nlohmann::json(nullptr); }

nlohmann::json array(const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(value(x));
    return a;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    row_ = header;
    end_row();
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (s.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char c : s) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c);
        row_.push_back(quoted + "\"");
    } else {
        row_.push_back(s);
    }
    return *this;
}

void CsvWriter::end_row() {
    for (std::size_t i = 0; i < row_.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += row_[i];
    }
    buffer_ += '\n';
    row_.clear();
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    write_text(path_, buffer_);
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
    if (!out) throw ValidationError("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

void warn(const std::string& message) { std::cerr << nlohmann::json{{"warning", message}}.dump() << "\n"; }

}  // namespace grasslens::cli::report
