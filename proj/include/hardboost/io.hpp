#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "hardboost/error.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

namespace fs = std::filesystem;

enum class FeatureFormat { binary, csv };

inline constexpr char kFeatureMagic[4] = {'Z', 'S', 'F', '1'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    std::uint64_t uint(int bytes, const char* field) {
        need(static_cast<std::size_t>(bytes), field);
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }

    std::string_view bytes(std::size_t n, const char* field) {
        need(n, field);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n, const char* field) const {
        if (data_.size() - pos_ < n) {
            throw LoadError(what_ + ": truncated while reading " + field);
        }
    }

    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError(path.string() + ": cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

// Lines of a text file with trailing CR removed and blank lines dropped,
// each paired with its 1-based line number.
inline std::vector<std::pair<std::size_t, std::string_view>> text_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> out;
    std::size_t lineno = 0;
    for (auto line : split_fields(text, '\n')) {
        ++lineno;
        line = trim(line);
        if (!line.empty()) out.emplace_back(lineno, line);
    }
    return out;
}

inline void check_label(const ClassId& label, const std::string& what) {
    if (label.empty() || label.find_first_of(",\n\r") != std::string::npos) {
        throw Error(what + ": label '" + label + "' is empty or contains a separator");
    }
}

template <class T>
std::string format_number(T v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(tmp.string() + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(tmp.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

// ---- feature tables -------------------------------------------------------

inline std::string encode_feature_binary(const FeatureTable& table) {
    std::string out;
    out.reserve(24 + table.values().size() * 4 + table.rows() * 4);
    out.append(kFeatureMagic, 4);
    detail::put_u32(out, kFeatureVersion);
    detail::put_u64(out, table.rows());
    detail::put_u32(out, static_cast<std::uint32_t>(table.dim()));
    for (float f : table.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    std::string labels;
    for (const auto& l : table.labels()) {
        detail::check_label(l, "feature table");
        labels += l;
        labels += '\n';
    }
    detail::put_u32(out, static_cast<std::uint32_t>(labels.size()));
    out += labels;
    return out;
}

inline FeatureTable decode_feature_binary(std::string_view data, const std::string& what) {
    detail::ByteReader in(data, what);
    if (in.bytes(4, "magic") != std::string_view(kFeatureMagic, 4)) {
        throw LoadError(what + ": bad magic (expected ZSF1)");
    }
    auto version = in.uint(4, "version");
    if (version != kFeatureVersion) {
        throw LoadError(what + ": unsupported version " + std::to_string(version));
    }
    auto rows = in.uint(8, "row count");
    auto dim = in.uint(4, "dim");
    if (dim == 0) throw LoadError(what + ": header dim must be >= 1");
    if (rows > in.remaining() / 4 / dim) {
        throw LoadError(what + ": header declares " + std::to_string(rows) +
                        " rows but file is too short");
    }
    std::vector<float> values(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < dim; ++j) {
            auto bits = static_cast<std::uint32_t>(in.uint(4, "features"));
            float f = std::bit_cast<float>(bits);
            if (!std::isfinite(f)) {
                throw LoadError(what + ": non-finite value at row " + std::to_string(r + 1) +
                                ", column " + std::to_string(j + 1));
            }
            values[r * dim + j] = f;
        }
    }
    auto len = in.uint(4, "label block length");
    auto block = in.bytes(len, "label block");
    if (in.remaining() != 0) throw LoadError(what + ": trailing bytes after label block");
    std::vector<ClassId> labels;
    labels.reserve(rows);
    std::size_t start = 0;
    while (start < block.size()) {
        auto nl = block.find('\n', start);
        if (nl == std::string_view::npos) nl = block.size();
        labels.emplace_back(block.substr(start, nl - start));
        if (labels.back().empty()) {
            throw LoadError(what + ": empty label at row " + std::to_string(labels.size()));
        }
        start = nl + 1;
    }
    if (labels.size() != rows) {
        throw LoadError(what + ": label block has " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(rows) + " rows");
    }
    return FeatureTable::from_parts(dim, std::move(values), std::move(labels));
}

inline std::string encode_feature_csv(const FeatureTable& table) {
    std::string out;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        detail::check_label(table.label(r), "feature table");
        out += table.label(r);
        for (float f : table.row(r)) {
            out += ',';
            out += detail::format_number(f);
        }
        out += '\n';
    }
    return out;
}

inline FeatureTable decode_feature_csv(std::string_view text, const std::string& what) {
    std::size_t dim = 0;
    std::vector<float> values;
    std::vector<ClassId> labels;
    for (auto [lineno, line] : detail::text_lines(text)) {
        auto fields = detail::split_fields(line);
        auto row_name = what + ": row " + std::to_string(labels.size() + 1) + " (line " +
                        std::to_string(lineno) + ")";
        if (fields.size() < 2) throw LoadError(row_name + ": expected label and >= 1 feature");
        if (dim == 0) dim = fields.size() - 1;
        if (fields.size() - 1 != dim) {
            throw LoadError(row_name + ": has " + std::to_string(fields.size() - 1) +
                            " features, expected " + std::to_string(dim));
        }
        auto label = std::string(detail::trim(fields[0]));
        if (label.empty()) throw LoadError(row_name + ": empty label");
        for (std::size_t j = 1; j < fields.size(); ++j) {
            float f = 0;
            if (!detail::parse_number(fields[j], f) || !std::isfinite(f)) {
                throw LoadError(row_name + ": bad or non-finite value '" +
                                std::string(fields[j]) + "'");
            }
            values.push_back(f);
        }
        labels.push_back(std::move(label));
    }
    return FeatureTable::from_parts(dim, std::move(values), std::move(labels));
}

inline FeatureTable load_feature_table(const fs::path& path, FeatureFormat format) {
    auto data = detail::read_file(path);
    return format == FeatureFormat::binary ? decode_feature_binary(data, path.string())
                                           : decode_feature_csv(data, path.string());
}

inline void save_feature_table(const fs::path& path, const FeatureTable& table,
                               FeatureFormat format) {
    write_file_atomic(path, format == FeatureFormat::binary ? encode_feature_binary(table)
                                                            : encode_feature_csv(table));
}

// ---- semantics, split, priors --------------------------------------------

inline SemanticTable decode_semantic_csv(std::string_view text, const std::string& what) {
    SemanticTable table;
    std::size_t dim = 0;
    for (auto [lineno, line] : detail::text_lines(text)) {
        auto fields = detail::split_fields(line);
        auto where = what + ": line " + std::to_string(lineno);
        if (fields.size() < 2) throw LoadError(where + ": expected class id and >= 1 value");
        if (dim == 0) dim = fields.size() - 1;
        if (fields.size() - 1 != dim) {
            throw LoadError(where + ": has " + std::to_string(fields.size() - 1) +
                            " values, expected " + std::to_string(dim));
        }
        ClassId id(detail::trim(fields[0]));
        SemanticVector v(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!detail::parse_number(fields[j + 1], v[j]) || !std::isfinite(v[j])) {
                throw LoadError(where + ": bad value '" + std::string(fields[j + 1]) + "'");
            }
        }
        if (!table.vectors.emplace(id, std::move(v)).second) {
            throw LoadError(where + ": duplicate class '" + id + "'");
        }
    }
    return table;
}

inline std::string encode_semantic_csv(const SemanticTable& table) {
    std::string out;
    for (const auto& [id, v] : table.vectors) {
        out += id;
        for (double x : v) {
            out += ',';
            out += detail::format_number(x);
        }
        out += '\n';
    }
    return out;
}

inline ClassSplit split_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("seen") || !j.contains("unseen")) {
        throw LoadError(what + ": expected object with 'seen' and 'unseen'");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "seen" && it.key() != "unseen") {
            throw LoadError(what + ": unknown key '" + it.key() + "'");
        }
    }
    try {
        auto seen = j.at("seen").get<std::vector<ClassId>>();
        auto unseen = j.at("unseen").get<std::vector<ClassId>>();
        return ClassSplit::make(std::move(seen), std::move(unseen));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(what + ": " + e.what());
    }
}

inline nlohmann::json split_to_json(const ClassSplit& split) {
    return {{"seen", split.seen}, {"unseen", split.unseen}};
}

inline nlohmann::json parse_json_file(const fs::path& path) {
    auto text = detail::read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---- pseudo label / prediction files -------------------------------------

// predictions.csv: header "row_index,predicted_class", one line per row.
inline std::string encode_predictions_csv(const PseudoLabelSet& preds) {
    std::string out = "row_index,predicted_class\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += preds.labels[i];
        out += '\n';
    }
    return out;
}

inline PseudoLabelSet decode_predictions_csv(std::string_view text, const std::string& what) {
    std::vector<std::pair<std::size_t, ClassId>> rows;
    for (auto [lineno, line] : detail::text_lines(text)) {
        auto fields = detail::split_fields(line);
        if (fields.size() != 2) throw LoadError(what + ": line " + std::to_string(lineno) + ": expected 2 fields");
        if (detail::trim(fields[0]) == "row_index") continue;
        std::size_t idx = 0;
        if (!detail::parse_number(fields[0], idx)) {
            throw LoadError(what + ": line " + std::to_string(lineno) + ": bad row index");
        }
        rows.emplace_back(idx, ClassId(detail::trim(fields[1])));
    }
    PseudoLabelSet out;
    out.labels.resize(rows.size());
    std::vector<bool> seen(rows.size(), false);
    for (auto& [idx, label] : rows) {
        if (idx >= rows.size() || seen[idx]) {
            throw LoadError(what + ": row indices must be a permutation of 0.." +
                            std::to_string(rows.size() - 1));
        }
        seen[idx] = true;
        out.labels[idx] = std::move(label);
    }
    return out;
}

// ---- dataset directories --------------------------------------------------
//
// <dir>/semantics.csv, <dir>/split.json, <dir>/train_seen.{zsf,csv},
// <dir>/test_unseen.{zsf,csv}, optional <dir>/test_seen.{zsf,csv} and
// <dir>/priors.json ({"class": probability, ...}).

inline std::optional<FeatureTable> load_table_if_present(const fs::path& dir, const std::string& stem) {
    if (fs::exists(dir / (stem + ".zsf"))) {
        return load_feature_table(dir / (stem + ".zsf"), FeatureFormat::binary);
    }
    if (fs::exists(dir / (stem + ".csv"))) {
        return load_feature_table(dir / (stem + ".csv"), FeatureFormat::csv);
    }
    return std::nullopt;
}

inline ClassPriors priors_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_object()) throw LoadError(what + ": expected an object of class -> prior");
    ClassPriors out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number()) throw LoadError(what + ": prior of '" + it.key() + "' is not a number");
        out[it.key()] = it.value().get<double>();
    }
    return out;
}

inline DatasetBundle load_bundle(const fs::path& dir) {
    DatasetBundle b;
    auto train = load_table_if_present(dir, "train_seen");
    auto test = load_table_if_present(dir, "test_unseen");
    if (!train) throw LoadError(dir.string() + ": missing train_seen.zsf or train_seen.csv");
    if (!test) throw LoadError(dir.string() + ": missing test_unseen.zsf or test_unseen.csv");
    b.train_seen = std::move(*train);
    b.test_unseen = std::move(*test);
    b.test_seen = load_table_if_present(dir, "test_seen");
    auto sem_path = dir / "semantics.csv";
    b.semantics = decode_semantic_csv(detail::read_file(sem_path), sem_path.string());
    auto split_path = dir / "split.json";
    b.split = split_from_json(parse_json_file(split_path), split_path.string());
    if (fs::exists(dir / "priors.json")) {
        b.class_priors = priors_from_json(parse_json_file(dir / "priors.json"),
                                          (dir / "priors.json").string());
    }
    return b;
}

inline void save_bundle(const fs::path& dir, const DatasetBundle& b) {
    fs::create_directories(dir);
    save_feature_table(dir / "train_seen.zsf", b.train_seen, FeatureFormat::binary);
    save_feature_table(dir / "test_unseen.zsf", b.test_unseen, FeatureFormat::binary);
    if (b.test_seen) save_feature_table(dir / "test_seen.zsf", *b.test_seen, FeatureFormat::binary);
    write_file_atomic(dir / "semantics.csv", encode_semantic_csv(b.semantics));
    write_file_atomic(dir / "split.json", dump_json(split_to_json(b.split)));
    if (b.class_priors) write_file_atomic(dir / "priors.json", dump_json(nlohmann::json(*b.class_priors)));
}

}  // namespace hardboost
