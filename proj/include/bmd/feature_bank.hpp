#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmd/matrix.hpp"

namespace bmd {

/// Text feature-bank format, one instance per CSV row:
///   # BMDFB1 n=<n> d=<d> K=<K> logits=<0|1> labels=<0|1>
///   f_1,...,f_d[,z_1,...,z_K][,label]
/// Floats are written with 17 significant digits so round-trips are exact.
struct FeatureBank {
    Matrix features;          // n x d
    Matrix logits;            // n x K when present, else 0 x 0
    std::vector<int> labels;  // length n when present
    std::size_t num_classes = 0;

    bool has_logits() const { return !logits.empty(); }
    bool has_labels() const { return !labels.empty(); }
};

/// Parse failure with a 1-based line and column of the offending text.
class BankParseError : public std::runtime_error {
public:
    BankParseError(std::size_t line, std::size_t column, const std::string& message);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

FeatureBank parse_feature_bank(const std::string& text);
std::string format_feature_bank(const FeatureBank& bank);

FeatureBank read_feature_bank(const std::string& path);
void write_feature_bank(const std::string& path, const FeatureBank& bank);

/// 17-significant-digit float text, the round-trip-exact convention used by
/// every CSV writer in this project.
std::string format_double(double value);

}  // namespace bmd
