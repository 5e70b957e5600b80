#include "sdlab/feature_io.hpp"

#include "sdlab/csv.hpp"
#include "sdlab/error.hpp"
#include "sdlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sdlab {

namespace {

int parse_label(const std::string& s) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw InvalidInput("bad label '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw InvalidInput("bad label '" + s + "'");
    }
}

void finish(FeatureDataset& data) {
    int top = -1;
    for (int y : data.labels) {
        if (y < 0) throw InvalidInput("labels must be nonnegative");
        top = std::max(top, y);
    }
    data.num_classes = top + 1;
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated binary feature file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::string labels_path_for(const std::string& binary_path) { return binary_path + ".labels.csv"; }

FeatureDataset read_features_csv(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    if (t.header.empty() || t.header.back() != "label")
        throw InvalidInput("feature CSV must end with a 'label' column");
    const std::size_t d = t.header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (t.header[j] != "f" + std::to_string(j))
            throw InvalidInput("feature CSV header must be f0,...,f{d-1},label");
    FeatureDataset out;
    out.features.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j)
            out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                parse_double(t.rows[i][j]);
        out.labels.push_back(parse_label(t.rows[i][d]));
    }
    finish(out);
    return out;
}

FeatureDataset read_features_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SDFT", 4) != 0) throw InvalidInput("missing SDFT magic");
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    FeatureDataset out;
    out.features.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            std::uint32_t bits = read_u32(in);
            float f;
            std::memcpy(&f, &bits, 4);
            out.features(i, j) = static_cast<double>(f);
        }
    }
    const CsvTable lab = read_csv_file(labels_path_for(path));
    if (lab.header.size() != 1 || lab.header[0] != "label")
        throw InvalidInput("label file must have a single 'label' column");
    if (lab.rows.size() != rows) throw InvalidInput("label count does not match feature rows");
    for (const auto& r : lab.rows) out.labels.push_back(parse_label(r[0]));
    finish(out);
    return out;
}

FeatureDataset read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, "SDFT", 4) == 0) return read_features_binary(path);
    return read_features_csv(path);
}

void write_features_csv(const std::string& path, const Eigen::MatrixXd& X,
                        const std::vector<int>& labels) {
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < X.cols(); ++j) header.push_back("f" + std::to_string(j));
    header.push_back("label");
    std::string text = csv_line(header);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::vector<std::string> row;
        for (Eigen::Index j = 0; j < X.cols(); ++j) row.push_back(format_double(X(i, j)));
        row.push_back(std::to_string(labels[static_cast<std::size_t>(i)]));
        text += csv_line(row);
    }
    write_text_file(path, text);
}

void write_features_binary(const std::string& path, const Eigen::MatrixXd& X,
                           const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write("SDFT", 4);
    write_u32(out, static_cast<std::uint32_t>(X.rows()));
    write_u32(out, static_cast<std::uint32_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const float f = static_cast<float>(X(i, j));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
    }
    if (!out) throw IoError("write to '" + path + "' failed");
    std::string text = "label\n";
    for (int y : labels) text += std::to_string(y) + "\n";
    write_text_file(labels_path_for(path), text);
}

void random_split(FeatureDataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw InvalidInput("test_fraction must lie in (0, 1)");
    const std::size_t N = data.labels.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(seed, 20);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(N) * test_fraction));
    data.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    data.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(data.test.begin(), data.test.end());
    std::sort(data.train.begin(), data.train.end());
}

}  // namespace sdlab
