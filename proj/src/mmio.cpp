// Matrix Market reader and writer.

#include "lrk/errors.hpp"
#include "lrk/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lrk {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct Header {
    bool coordinate = true;
    bool pattern = false;
    std::string symmetry = "general";
};

class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
        if (!in_) throw ParseError(path.string(), 0, "cannot open file");
    }

    // Next line that is neither empty nor a comment. False at end of file.
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            const auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos || line[pos] == '%') continue;
            return true;
        }
        return false;
    }

    bool raw(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_.string(), line_no_, what); }
    std::size_t line() const { return line_no_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

Header read_header(LineReader& rd) {
    std::string line;
    if (!rd.raw(line)) rd.fail("empty file");
    std::istringstream is(line);
    std::string banner, object, format, field, symmetry;
    is >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") rd.fail("missing %%MatrixMarket banner");
    if (lower(object) != "matrix") rd.fail("unsupported object '" + object + "'");
    Header h;
    format = lower(format);
    field = lower(field);
    h.symmetry = lower(symmetry);
    if (format == "coordinate")
        h.coordinate = true;
    else if (format == "array")
        h.coordinate = false;
    else
        rd.fail("unsupported format '" + format + "'");
    if (field == "pattern")
        h.pattern = true;
    else if (field != "real" && field != "integer" && field != "double")
        rd.fail("unsupported field '" + field + "'");
    if (h.symmetry != "general" && h.symmetry != "symmetric" && h.symmetry != "skew-symmetric")
        rd.fail("unsupported symmetry '" + symmetry + "'");
    if (h.pattern && !h.coordinate) rd.fail("pattern field requires coordinate format");
    return h;
}

template <typename... T>
void parse_fields(LineReader& rd, const std::string& line, const char* what, T&... out) {
    std::istringstream is(line);
    ((is >> out), ...);
    if (!is) rd.fail(std::string("malformed ") + what);
    std::string extra;
    if (is >> extra) rd.fail(std::string("trailing data in ") + what);
}

void write_number(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

std::FILE* open_for_write(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    return f;
}

void close_checked(std::FILE* f, const std::filesystem::path& path) {
    if (std::fclose(f) != 0) throw Error("error writing " + path.string());
}

}  // namespace

SparseMatrix read_mm(const std::filesystem::path& path) {
    LineReader rd(path);
    const Header h = read_header(rd);
    if (!h.coordinate) return Matrix(read_mm_dense(path)).sparseView(0.0, 0.0);

    std::string line;
    if (!rd.next(line)) rd.fail("missing size line");
    long long rows = 0, cols = 0, nnz = 0;
    parse_fields(rd, line, "size line", rows, cols, nnz);
    if (rows < 0 || cols < 0 || nnz < 0) rd.fail("negative size");
    if (h.symmetry != "general" && rows != cols) rd.fail("symmetric storage of a non-square matrix");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nnz) * (h.symmetry == "general" ? 1 : 2));
    for (long long k = 0; k < nnz; ++k) {
        if (!rd.next(line))
            rd.fail("file ends after " + std::to_string(k) + " of " + std::to_string(nnz) + " entries");
        long long i = 0, j = 0;
        double v = 1.0;
        if (h.pattern)
            parse_fields(rd, line, "entry", i, j);
        else
            parse_fields(rd, line, "entry", i, j, v);
        if (i < 1 || i > rows || j < 1 || j > cols) rd.fail("index out of range");
        trip.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
        if (i != j && h.symmetry == "symmetric") trip.emplace_back(static_cast<Index>(j - 1), static_cast<Index>(i - 1), v);
        if (h.symmetry == "skew-symmetric") {
            if (i == j) rd.fail("nonzero diagonal in skew-symmetric matrix");
            trip.emplace_back(static_cast<Index>(j - 1), static_cast<Index>(i - 1), -v);
        }
    }
    if (rd.next(line)) rd.fail("more entries than declared");
    SparseMatrix a(static_cast<Index>(rows), static_cast<Index>(cols));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

Matrix read_mm_dense(const std::filesystem::path& path) {
    LineReader rd(path);
    const Header h = read_header(rd);
    if (h.coordinate) return Matrix(read_mm(path));
    std::string line;
    if (!rd.next(line)) rd.fail("missing size line");
    long long rows = 0, cols = 0;
    parse_fields(rd, line, "size line", rows, cols);
    if (rows < 0 || cols < 0) rd.fail("negative size");
    if (h.symmetry != "general") rd.fail("only general array storage is supported");
    Matrix a(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            if (!rd.next(line)) rd.fail("file ends before all entries were read");
            double v = 0.0;
            parse_fields(rd, line, "entry", v);
            a(i, j) = v;
        }
    }
    if (rd.next(line)) rd.fail("more entries than declared");
    return a;
}

void write_mm(const std::filesystem::path& path, const SparseMatrix& a) {
    std::FILE* f = open_for_write(path);
    std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n");
    std::fprintf(f, "%lld %lld %lld\n", static_cast<long long>(a.rows()), static_cast<long long>(a.cols()),
                 static_cast<long long>(a.nonZeros()));
    for (Index k = 0; k < a.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            std::fprintf(f, "%lld %lld ", static_cast<long long>(it.row() + 1), static_cast<long long>(it.col() + 1));
            write_number(f, it.value());
            std::fputc('\n', f);
        }
    }
    close_checked(f, path);
}

void write_mm_dense(const std::filesystem::path& path, const Matrix& a) {
    std::FILE* f = open_for_write(path);
    std::fprintf(f, "%%%%MatrixMarket matrix array real general\n");
    std::fprintf(f, "%lld %lld\n", static_cast<long long>(a.rows()), static_cast<long long>(a.cols()));
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            write_number(f, a(i, j));
            std::fputc('\n', f);
        }
    }
    close_checked(f, path);
}

}  // namespace lrk
