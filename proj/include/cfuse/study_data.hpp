#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cfuse {

enum class Source { kRct, kOs };

struct UnitRecord {
    std::string id;
    Source source = Source::kOs;
    int z = 0;
    double y = 0.0;
    std::vector<double> x;
    std::optional<std::string> block;
    bool in_overlap = true;
    // Outcome before residualization, kept for reporting.
    std::optional<double> y_raw;
};

struct StudyCounts {
    std::size_t n_r = 0;
    std::size_t n_o = 0;
    std::size_t n_o1_plus = 0;
    std::size_t n_o1_minus = 0;
};

/// Validated, immutable collection of units from both sources.
class StudyData {
public:
    StudyData() = default;
    /// Throws InputError when a record breaks an invariant.
    StudyData(std::vector<UnitRecord> records, std::vector<std::string> covariate_names);

    std::vector<UnitRecord> const& records() const { return records_; }
    std::vector<std::string> const& covariate_names() const { return covariate_names_; }
    std::size_t dim() const { return covariate_names_.size(); }
    std::size_t size() const { return records_.size(); }
    StudyCounts const& counts() const { return counts_; }
    bool has_blocks() const;

private:
    std::vector<UnitRecord> records_;
    std::vector<std::string> covariate_names_;
    StudyCounts counts_;
};

struct CovariateBound {
    std::size_t index = 0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct OverlapRule {
    enum class Mode { kExplicit, kRctBoundingBox };
    Mode mode = Mode::kExplicit;
    std::vector<CovariateBound> bounds;

    static OverlapRule unbounded() { return {}; }
    static OverlapRule rct_bounding_box() { return {Mode::kRctBoundingBox, {}}; }
    bool contains(std::vector<double> const& x) const;
};

/// Reads `id,source,z,y,<covariates>[,block][,in_overlap]`. When `covariates` is
/// empty every column other than the reserved ones is a covariate, in header
/// order. Errors cite the 1-based data row (header excluded) and column.
StudyData load_csv(std::string const& path, std::vector<std::string> const& covariates = {});
StudyData parse_csv(std::string const& text, std::vector<std::string> const& covariates = {});

/// Writes the same layout with 17 significant digits, so parse_csv(to_csv(d))
/// reproduces d exactly.
std::string to_csv(StudyData const& data);
void write_csv(std::string const& path, StudyData const& data);

StudyData apply_overlap(StudyData const& data, OverlapRule const& rule);

/// Replaces y by residuals of one pooled OLS of y on all covariates (both
/// sources, treatment excluded). The previous y lands in y_raw.
StudyData residualize(StudyData const& data);

}  // namespace cfuse
