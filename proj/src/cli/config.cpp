#include "grasslens/cli.hpp"

#include "grasslens/errors.hpp"

#include <algorithm>
#include <sstream>

namespace grasslens::cli {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

}  // namespace

std::vector<int> parse_percent_list(const std::string& text) {
    std::vector<int> out;
    for (auto& item : split(text, ',')) {
        if (!item.empty() && item.back() == '%') item.pop_back();
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v <= 0 || v > 100)
            throw ValidationError("'" + item + "' is not an integer percent in (0, 100]");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("empty percent list");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::set<Format> parse_formats(const std::string& text) {
    std::set<Format> out;
    for (const auto& item : split(text, ',')) {
        if (item == "csv") out.insert(Format::Csv);
        else if (item == "json") out.insert(Format::Json);
        else if (item == "svg") out.insert(Format::Svg);
        else throw ValidationError("unknown report format '" + item + "' (expected csv, json, svg)");
    }
    if (out.empty()) throw ValidationError("no report format selected");
    return out;
}

void RunConfig::validate() const {
    if (manifests.empty()) throw ValidationError("no manifest given (--manifest)");
    if (!(sigma >= 0.0)) throw ValidationError("--sigma must be >= 0");
    if (k_grid.empty()) throw ValidationError("--k-grid is empty");
    for (int c : consensus)
        if (std::find(k_grid.begin(), k_grid.end(), c) == k_grid.end())
            throw ValidationError("consensus resolution " + std::to_string(c) + "% is not in the k grid");
    if (consensus.empty()) throw ValidationError("--consensus is empty");
    if (batch_size == 0) throw ValidationError("--batch-size must be positive");
    for (auto k : hit_ks)
        if (k == 0) throw ValidationError("Hit@k cutoffs must be >= 1");
    if (breakpoints && !(breakpoints->first >= 1 && breakpoints->first < breakpoints->second))
        throw ValidationError("--breakpoints needs 1 <= b1 < b2");
}

}  // namespace grasslens::cli
