#include "hints/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "hints/errors.hpp"

namespace hints {

void MultivariateSeries::validate() const {
    if (dims() < 1) throw Error("series needs at least one variable");
    if (length() < 2) throw Error("series needs at least two time steps");
    if (names.size() != dims())
        throw ShapeMismatch("names count " + std::to_string(names.size()) +
                            " != D " + std::to_string(dims()));
    std::unordered_set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second) throw Error("duplicate variable name: " + n);
    if (!timestamps.empty() && timestamps.size() != length())
        throw ShapeMismatch("timestamps count != T");
    if (!values.all_finite()) throw Error("series contains non-finite values");
}

void SplitSpec::validate() const {
    auto in01 = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in01(train_frac) || !in01(val_frac) || !in01(test_frac))
        throw UsageError("split fractions must lie in (0,1)");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw UsageError("split fractions must sum to 1");
}

SplitIndices make_splits(std::size_t T, const SplitSpec& spec) {
    spec.validate();
    auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(T)));
    auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(T)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= T)
        throw UsageError("series too short for the requested split fractions");
    SplitIndices s;
    s.train = {0, n_train};
    s.val = {n_train, n_train + n_val};
    s.test = {n_train + n_val, T};
    return s;
}

Mat slice_cols(const Mat& values, IndexRange range) {
    if (range.end > values.cols() || range.begin > range.end)
        throw UsageError("column slice out of range");
    Mat out(values.rows(), range.length());
    for (std::size_t d = 0; d < values.rows(); ++d)
        std::copy(values.row(d) + range.begin, values.row(d) + range.end, out.row(d));
    return out;
}

std::vector<WindowPair> make_windows(const Mat& values, IndexRange range,
                                     std::size_t L, std::size_t h, std::size_t stride) {
    if (L == 0 || h == 0 || stride == 0)
        throw UsageError("window parameters must be positive");
    const std::size_t D = values.rows();
    const std::size_t T = range.length();
    if (T < L + h) throw SeriesTooShort(T, L, h);

    const std::size_t count = (T - L - h) / stride + 1;
    std::vector<WindowPair> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = range.begin + w * stride;
        WindowPair p;
        p.start = start;
        p.input = Mat(D, L);
        p.target = Mat(D, h);
        for (std::size_t d = 0; d < D; ++d) {
            const double* src = values.row(d);
            std::copy(src + start, src + start + L, p.input.row(d));
            std::copy(src + start + L, src + start + L + h, p.target.row(d));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<WindowPair> make_windows(const MultivariateSeries& series,
                                     std::size_t L, std::size_t h, std::size_t stride) {
    return make_windows(series.values, {0, series.length()}, L, h, stride);
}

Normalizer fit_normalizer(const Mat& values, IndexRange train_range) {
    if (train_range.length() < 2)
        throw UsageError("normalizer fit range needs at least two points");
    if (train_range.end > values.cols())
        throw UsageError("normalizer fit range exceeds series length");
    const std::size_t D = values.rows();
    const std::size_t n = train_range.length();

    Normalizer nm;
    nm.mean.resize(D);
    nm.stddev.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double* row = values.row(d);
        double sum = 0.0;
        for (std::size_t t = train_range.begin; t < train_range.end; ++t) sum += row[t];
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t t = train_range.begin; t < train_range.end; ++t) {
            const double dev = row[t] - mu;
            ss += dev * dev;
        }
        const double sigma = std::sqrt(ss / static_cast<double>(n));
        if (sigma == 0.0) throw ConstantVariable(d);
        nm.mean[d] = mu;
        nm.stddev[d] = sigma;
    }
    return nm;
}

Mat Normalizer::transform(const Mat& values) const {
    if (values.rows() != mean.size()) throw ShapeMismatch("normalizer D != series D");
    Mat out(values.rows(), values.cols());
    for (std::size_t d = 0; d < values.rows(); ++d)
        for (std::size_t t = 0; t < values.cols(); ++t)
            out(d, t) = (values(d, t) - mean[d]) / stddev[d];
    return out;
}

Mat Normalizer::inverse(const Mat& values) const {
    if (values.rows() != mean.size()) throw ShapeMismatch("normalizer D != series D");
    Mat out(values.rows(), values.cols());
    for (std::size_t d = 0; d < values.rows(); ++d)
        for (std::size_t t = 0; t < values.cols(); ++t)
            out(d, t) = values(d, t) * stddev[d] + mean[d];
    return out;
}

// ---- CSV -------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(cell);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = strip(text);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) return false;
    return std::isfinite(out);
}

} // namespace

MultivariateSeries load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) throw EmptyFile(path);
    const auto header = split_line(strip(header_line), schema.delimiter);
    if (header.empty()) throw EmptyFile(path);

    auto find_col = [&](const std::string& name) -> long {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (strip(header[i]) == name) return static_cast<long>(i);
        return -1;
    };

    const long ts_col = schema.timestamp_column.empty() ? -1 : find_col(schema.timestamp_column);

    std::vector<std::size_t> mapped; // file-column index per ingested variable
    std::vector<std::string> names;
    if (schema.columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (static_cast<long>(i) == ts_col) continue;
            mapped.push_back(i);
            names.push_back(strip(header[i]));
        }
    } else {
        for (const auto& want : schema.columns) {
            const long idx = find_col(want);
            if (idx < 0) throw MissingColumn(want, path);
            mapped.push_back(static_cast<std::size_t>(idx));
            names.push_back(want);
        }
    }
    if (mapped.empty()) throw EmptyFile(path);

    std::vector<std::vector<double>> cols(mapped.size());
    std::vector<std::string> timestamps;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const std::string stripped = strip(line);
        if (stripped.empty()) continue;
        ++row;
        const auto cells = split_line(stripped, schema.delimiter);
        if (ts_col >= 0 && static_cast<std::size_t>(ts_col) < cells.size())
            timestamps.push_back(strip(cells[static_cast<std::size_t>(ts_col)]));
        for (std::size_t c = 0; c < mapped.size(); ++c) {
            if (mapped[c] >= cells.size()) throw NonNumericCell(row, c + 1, "<missing>");
            double v;
            if (!parse_double(cells[mapped[c]], v)) throw NonNumericCell(row, c + 1, strip(cells[mapped[c]]));
            cols[c].push_back(v);
        }
    }
    if (row == 0) throw EmptyFile(path);

    MultivariateSeries s;
    s.values = Mat(mapped.size(), row);
    for (std::size_t d = 0; d < mapped.size(); ++d)
        std::copy(cols[d].begin(), cols[d].end(), s.values.row(d));
    s.names = std::move(names);
    if (ts_col >= 0 && timestamps.size() == row) s.timestamps = std::move(timestamps);
    s.validate();
    return s;
}

void save_csv(const MultivariateSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out.precision(17);
    const bool ts = !series.timestamps.empty();
    if (ts) out << "date";
    for (std::size_t d = 0; d < series.dims(); ++d) {
        if (ts || d > 0) out << ',';
        out << series.names[d];
    }
    out << '\n';
    for (std::size_t t = 0; t < series.length(); ++t) {
        if (ts) out << series.timestamps[t];
        for (std::size_t d = 0; d < series.dims(); ++d) {
            if (ts || d > 0) out << ',';
            out << series.values(d, t);
        }
        out << '\n';
    }
}

} // namespace hints
