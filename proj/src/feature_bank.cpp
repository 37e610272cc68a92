#include "bmd/feature_bank.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bmd {

namespace {

std::string position_message(std::size_t line, std::size_t column, const std::string& message) {
    std::ostringstream os;
    os << "line " << line << ", column " << column << ": " << message;
    return os.str();
}

}  // namespace

BankParseError::BankParseError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(position_message(line, column, message)), line_(line), column_(column) {}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

// one comma-separated field; `column` is the 1-based offset of its first char
struct Field {
    std::string text;
    std::size_t column;
};

std::vector<Field> split_fields(const std::string& line) {
    std::vector<Field> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        const std::size_t end = comma == std::string::npos ? line.size() : comma;
        out.push_back({line.substr(start, end - start), start + 1});
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double_field(const Field& f, std::size_t line_no) {
    if (f.text.empty()) throw BankParseError(line_no, f.column, "empty field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(f.text.c_str(), &end);
    if (end != f.text.c_str() + f.text.size() || errno == ERANGE)
        throw BankParseError(line_no, f.column, "malformed number '" + f.text + "'");
    return v;
}

long parse_int_field(const Field& f, std::size_t line_no) {
    if (f.text.empty()) throw BankParseError(line_no, f.column, "empty field");
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(f.text.c_str(), &end, 10);
    if (end != f.text.c_str() + f.text.size() || errno == ERANGE)
        throw BankParseError(line_no, f.column, "malformed integer '" + f.text + "'");
    return v;
}

// header tokens are fixed-order: # BMDFB1 n=.. d=.. K=.. logits=.. labels=..
unsigned long parse_header_value(const std::string& header, std::size_t& cursor,
                                 const std::string& key, unsigned long max_value) {
    const std::string want = key + "=";
    if (header.compare(cursor, want.size(), want) != 0)
        throw BankParseError(1, cursor + 1, "expected '" + want + "'");
    cursor += want.size();
    const std::size_t value_col = cursor + 1;
    std::size_t end = header.find(' ', cursor);
    if (end == std::string::npos) end = header.size();
    const std::string text = header.substr(cursor, end - cursor);
    if (text.empty()) throw BankParseError(1, value_col, "empty value for '" + key + "'");
    errno = 0;
    char* stop = nullptr;
    const unsigned long v = std::strtoul(text.c_str(), &stop, 10);
    if (stop != text.c_str() + text.size() || errno == ERANGE)
        throw BankParseError(1, value_col, "malformed value for '" + key + "'");
    if (v > max_value)
        throw BankParseError(1, value_col, "value for '" + key + "' out of range");
    cursor = end < header.size() ? end + 1 : end;
    return v;
}

}  // namespace

FeatureBank parse_feature_bank(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) throw BankParseError(1, 1, "missing header line");
    if (!header.empty() && header.back() == '\r') header.pop_back();

    const std::string magic = "# BMDFB1 ";
    if (header.compare(0, magic.size(), magic) != 0)
        throw BankParseError(1, 1, "expected '# BMDFB1' header");
    std::size_t cursor = magic.size();
    const unsigned long n = parse_header_value(header, cursor, "n", 100000000UL);
    const unsigned long d = parse_header_value(header, cursor, "d", 1000000UL);
    const unsigned long K = parse_header_value(header, cursor, "K", 1000000UL);
    const unsigned long has_logits = parse_header_value(header, cursor, "logits", 1UL);
    const unsigned long has_labels = parse_header_value(header, cursor, "labels", 1UL);
    if (cursor < header.size())
        throw BankParseError(1, cursor + 1, "trailing text after header");
    if (d == 0) throw BankParseError(1, 1, "d must be >= 1");
    if (K == 0) throw BankParseError(1, 1, "K must be >= 1");

    FeatureBank bank;
    bank.num_classes = K;
    bank.features = Matrix(n, d);
    if (has_logits) bank.logits = Matrix(n, K);
    if (has_labels) bank.labels.assign(n, 0);

    const std::size_t want_fields = d + (has_logits ? K : 0) + (has_labels ? 1 : 0);
    std::size_t row = 0;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row >= n)
            throw BankParseError(line_no, 1, "more data rows than the declared n=" +
                                                 std::to_string(n));
        const std::vector<Field> fields = split_fields(line);
        if (fields.size() != want_fields)
            throw BankParseError(line_no, 1,
                                 "expected " + std::to_string(want_fields) + " fields, got " +
                                     std::to_string(fields.size()));
        std::size_t f = 0;
        for (std::size_t c = 0; c < d; ++c, ++f)
            bank.features(row, c) = parse_double_field(fields[f], line_no);
        if (has_logits)
            for (std::size_t c = 0; c < K; ++c, ++f)
                bank.logits(row, c) = parse_double_field(fields[f], line_no);
        if (has_labels) {
            const long v = parse_int_field(fields[f], line_no);
            if (v < 0 || static_cast<unsigned long>(v) >= K)
                throw BankParseError(line_no, fields[f].column,
                                     "label " + std::to_string(v) + " out of range [0, " +
                                         std::to_string(K) + ")");
            bank.labels[row] = static_cast<int>(v);
        }
        ++row;
    }
    if (row != n)
        throw BankParseError(line_no + 1, 1,
                             "expected " + std::to_string(n) + " data rows, got " +
                                 std::to_string(row));
    return bank;
}

std::string format_feature_bank(const FeatureBank& bank) {
    const std::size_t n = bank.features.rows();
    const std::size_t d = bank.features.cols();
    const std::size_t K = bank.num_classes;
    if (bank.has_logits() && (bank.logits.rows() != n || bank.logits.cols() != K))
        throw std::invalid_argument("logits shape mismatch");
    if (bank.has_labels() && bank.labels.size() != n)
        throw std::invalid_argument("labels length mismatch");
    if (K == 0) throw std::invalid_argument("num_classes must be >= 1");

    std::ostringstream os;
    os << "# BMDFB1 n=" << n << " d=" << d << " K=" << K << " logits="
       << (bank.has_logits() ? 1 : 0) << " labels=" << (bank.has_labels() ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            if (c) os << ',';
            os << format_double(bank.features(i, c));
        }
        if (bank.has_logits())
            for (std::size_t c = 0; c < K; ++c) os << ',' << format_double(bank.logits(i, c));
        if (bank.has_labels()) os << ',' << bank.labels[i];
        os << "\n";
    }
    return os.str();
}

FeatureBank read_feature_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_feature_bank(buf.str());
}

void write_feature_bank(const std::string& path, const FeatureBank& bank) {
    const std::string text = format_feature_bank(bank);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace bmd
