#include "cfuse/study_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cfuse/error.hpp"
#include "cfuse/stat_kernel.hpp"

namespace cfuse {

StudyData::StudyData(std::vector<UnitRecord> records, std::vector<std::string> covariate_names)
    : records_(std::move(records)), covariate_names_(std::move(covariate_names))
{
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto const& r = records_[i];
        auto fail = [&](std::string const& why) {
            throw InputError("record " + std::to_string(i + 1) + " (id '" + r.id + "'): " + why);
        };
        if (r.z != 0 && r.z != 1) {
            fail("z must be 0 or 1");
        }
        if (!std::isfinite(r.y)) {
            fail("outcome is not finite");
        }
        if (r.x.size() != covariate_names_.size()) {
            fail("covariate dimension mismatch");
        }
        for (double v : r.x) {
            if (!std::isfinite(v)) {
                fail("covariate is not finite");
            }
        }
        if (r.source == Source::kRct && !r.in_overlap) {
            fail("RCT units must lie in the overlap region");
        }
        if (!seen.insert(r.id).second) {
            fail("duplicate id");
        }
        if (r.source == Source::kRct) {
            ++counts_.n_r;
        } else {
            ++counts_.n_o;
            if (r.z == 1) {
                ++(r.in_overlap ? counts_.n_o1_plus : counts_.n_o1_minus);
            }
        }
    }
}

bool StudyData::has_blocks() const
{
    return std::any_of(records_.begin(), records_.end(), [](UnitRecord const& r) {
        return r.source == Source::kRct && r.block.has_value();
    });
}

bool OverlapRule::contains(std::vector<double> const& x) const
{
    for (auto const& b : bounds) {
        if (x[b.index] < b.lo || x[b.index] > b.hi) {
            return false;
        }
    }
    return true;
}

namespace {

std::string trim(std::string_view s)
{
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_row(std::string const& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t const comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::string lower(std::string s)
{
    for (auto& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

bool parse_double(std::string const& cell, double& out)
{
    if (cell.empty()) {
        return false;
    }
    char const* first = cell.data();
    char const* last = cell.data() + cell.size();
    if (*first == '+') {
        ++first;
    }
    auto const [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

StudyData parse_csv(std::string const& text, std::vector<std::string> const& covariates)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty() || line[0] == '#') {
            continue;
        }
        header = split_row(line);
        break;
    }
    if (header.empty()) {
        throw InputError("csv: missing header row");
    }
    if (!header.empty() && header[0].size() >= 3
        && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header[0].erase(0, 3);
    }

    auto find_col = [&](std::string const& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    };
    auto require_col = [&](std::string const& name) {
        auto c = find_col(name);
        if (!c) {
            throw InputError("csv: missing required column '" + name + "'");
        }
        return *c;
    };
    std::size_t const c_id = require_col("id");
    std::size_t const c_source = require_col("source");
    std::size_t const c_z = require_col("z");
    std::size_t const c_y = require_col("y");
    auto const c_block = find_col("block");
    auto const c_overlap = find_col("in_overlap");

    std::vector<std::string> names;
    std::vector<std::size_t> cov_cols;
    if (covariates.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            auto const& h = header[i];
            if (h == "id" || h == "source" || h == "z" || h == "y" || h == "block"
                || h == "in_overlap") {
                continue;
            }
            names.push_back(h);
            cov_cols.push_back(i);
        }
    } else {
        for (auto const& name : covariates) {
            names.push_back(name);
            cov_cols.push_back(require_col(name));
        }
    }

    std::vector<UnitRecord> records;
    std::unordered_set<std::string> ids;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty() || line[0] == '#') {
            continue;
        }
        ++row;
        auto const cells = split_row(line);
        auto fail = [&](std::string const& col, std::string const& why) {
            throw InputError("csv: row " + std::to_string(row) + " (line "
                             + std::to_string(line_no) + "), column '" + col + "': " + why);
        };
        if (cells.size() != header.size()) {
            fail("*", "expected " + std::to_string(header.size()) + " cells, found "
                          + std::to_string(cells.size()));
        }
        UnitRecord rec;
        rec.id = cells[c_id];
        if (rec.id.empty()) {
            fail("id", "empty id");
        }
        if (!ids.insert(rec.id).second) {
            fail("id", "duplicate id '" + rec.id + "'");
        }
        auto const src = lower(cells[c_source]);
        if (src == "rct") {
            rec.source = Source::kRct;
        } else if (src == "os") {
            rec.source = Source::kOs;
        } else {
            fail("source", "unknown source tag '" + cells[c_source] + "' (expected rct or os)");
        }
        if (cells[c_z] == "0") {
            rec.z = 0;
        } else if (cells[c_z] == "1") {
            rec.z = 1;
        } else {
            fail("z", "treatment must be 0 or 1, found '" + cells[c_z] + "'");
        }
        if (!parse_double(cells[c_y], rec.y)) {
            fail("y", "non-numeric or missing value '" + cells[c_y] + "'");
        }
        rec.x.resize(cov_cols.size());
        for (std::size_t j = 0; j < cov_cols.size(); ++j) {
            if (!parse_double(cells[cov_cols[j]], rec.x[j])) {
                fail(names[j], "non-numeric or missing value '" + cells[cov_cols[j]] + "'");
            }
        }
        if (c_block && !cells[*c_block].empty()) {
            rec.block = cells[*c_block];
        }
        if (c_overlap) {
            auto const& v = cells[*c_overlap];
            if (v == "1" || v == "true") {
                rec.in_overlap = true;
            } else if (v == "0" || v == "false") {
                rec.in_overlap = false;
            } else {
                fail("in_overlap", "expected 0/1");
            }
        }
        if (rec.source == Source::kRct && !rec.in_overlap) {
            fail("in_overlap", "RCT units must lie in the overlap region");
        }
        records.push_back(std::move(rec));
    }
    return StudyData(std::move(records), std::move(names));
}

StudyData load_csv(std::string const& path, std::vector<std::string> const& covariates)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("csv: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), covariates);
}

std::string to_csv(StudyData const& data)
{
    std::ostringstream out;
    bool const blocks = std::any_of(data.records().begin(), data.records().end(),
                                    [](UnitRecord const& r) { return r.block.has_value(); });
    out << "id,source,z,y";
    for (auto const& n : data.covariate_names()) {
        out << ',' << n;
    }
    if (blocks) {
        out << ",block";
    }
    out << ",in_overlap\n";
    for (auto const& r : data.records()) {
        out << r.id << ',' << (r.source == Source::kRct ? "rct" : "os") << ',' << r.z << ','
            << format_double(r.y);
        for (double v : r.x) {
            out << ',' << format_double(v);
        }
        if (blocks) {
            out << ',' << r.block.value_or("");
        }
        out << ',' << (r.in_overlap ? 1 : 0) << '\n';
    }
    return out.str();
}

void write_csv(std::string const& path, StudyData const& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("csv: cannot write '" + path + "'");
    }
    out << to_csv(data);
}

StudyData apply_overlap(StudyData const& data, OverlapRule const& rule)
{
    OverlapRule effective = rule;
    if (rule.mode == OverlapRule::Mode::kRctBoundingBox) {
        if (data.counts().n_r == 0) {
            throw InputError("apply_overlap: RCT bounding box needs at least one RCT record");
        }
        effective.bounds.clear();
        for (std::size_t j = 0; j < data.dim(); ++j) {
            CovariateBound b{j, std::numeric_limits<double>::infinity(),
                             -std::numeric_limits<double>::infinity()};
            for (auto const& r : data.records()) {
                if (r.source == Source::kRct) {
                    b.lo = std::min(b.lo, r.x[j]);
                    b.hi = std::max(b.hi, r.x[j]);
                }
            }
            effective.bounds.push_back(b);
        }
    }
    for (auto const& b : effective.bounds) {
        if (b.index >= data.dim()) {
            throw InputError("apply_overlap: covariate index " + std::to_string(b.index)
                             + " out of range");
        }
        if (b.lo > b.hi) {
            throw InputError("apply_overlap: bound with lo > hi");
        }
    }
    std::vector<UnitRecord> out = data.records();
    for (auto& r : out) {
        r.in_overlap = r.source == Source::kRct || effective.contains(r.x);
    }
    return StudyData(std::move(out), data.covariate_names());
}

StudyData residualize(StudyData const& data)
{
    auto const n = static_cast<Eigen::Index>(data.size());
    auto const p = static_cast<Eigen::Index>(data.dim());
    if (n < p + 2) {
        throw InputError("residualize: need at least p + 2 records");
    }
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const& r = data.records()[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) {
            x(i, j) = r.x[static_cast<std::size_t>(j)];
        }
        y[i] = r.y;
    }
    RegressionFit const fit = fit_linear(x, y);
    std::vector<UnitRecord> out = data.records();
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& r = out[static_cast<std::size_t>(i)];
        if (!r.y_raw) {
            r.y_raw = r.y;
        }
        r.y = fit.residuals[i];
    }
    return StudyData(std::move(out), data.covariate_names());
}

}  // namespace cfuse
