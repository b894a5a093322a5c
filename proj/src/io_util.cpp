#include "lur/io_util.hpp"

#include "lur/common.hpp"

#include <boost/tokenizer.hpp>
#include <fmt/core.h>
#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>

namespace lur::io {

std::string read_text(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ValidationError(fmt::format("cannot read {}", path.string()));
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ValidationError(fmt::format("cannot write {}", path.string()));
    }
    os << text;
}

std::vector<std::vector<std::string>> parse_csv(const std::string &text) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    const boost::escaped_list_separator<char> sep('\0', ',', '"');
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3); // UTF-8 BOM
        }
        first = false;
        Tokenizer tok(line, sep);
        rows.emplace_back(tok.begin(), tok.end());
        if (rows.back().empty()) {
            rows.back().emplace_back();
        }
    }
    return rows;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &path) {
    try {
        return parse_csv(read_text(path));
    } catch (const boost::escaped_list_error &e) {
        throw ValidationError(fmt::format("{}: malformed CSV: {}", path.string(), e.what()));
    }
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::string format_double(double v) { return fmt::format("{}", v); }

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw ComputeError("SHA-256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

std::string sha256_file(const std::filesystem::path &path) { return sha256_hex(read_text(path)); }

} // namespace lur::io
