#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace anderson {

// Reports use ordered_json so key order is insertion order: rendering the
// same report twice yields byte-identical text, which is what the golden
// fixtures hash. Doubles go through the library's shortest-round-trip
// formatter, so the digest is stable for a fixed binary.
using Json = nlohmann::ordered_json;

inline Json json_vector(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json json_matrix(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (long i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

template <typename T>
inline Json json_list(const std::vector<T>& v) {
    Json a = Json::array();
    for (const auto& x : v) a.push_back(x);
    return a;
}

inline std::string render_json(const Json& j) { return j.dump(2) + "\n"; }

// FNV-1a, 64-bit; digests identify golden reports.
inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string digest_hex(const std::string& text) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t h = fnv1a64(text);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace anderson
