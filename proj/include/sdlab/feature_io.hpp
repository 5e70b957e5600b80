#pragma once

#include "sdlab/probe_sd.hpp"

#include <string>

namespace sdlab {

// Two on-disk layouts:
//  * CSV with header f0,...,f{d-1},label
//  * binary: "SDFT", uint32 LE rows, uint32 LE cols, float32 LE row-major;
//    labels in the sibling file <path>.labels.csv with header "label".

/// Loads features and labels; train/test are left empty.
FeatureDataset read_features(const std::string& path);
FeatureDataset read_features_csv(const std::string& path);
FeatureDataset read_features_binary(const std::string& path);

void write_features_csv(const std::string& path, const Eigen::MatrixXd& X,
                        const std::vector<int>& labels);
void write_features_binary(const std::string& path, const Eigen::MatrixXd& X,
                           const std::vector<int>& labels);

std::string labels_path_for(const std::string& binary_path);

/// Deterministic split: a seeded permutation, the first round(N * test_fraction) go to test.
void random_split(FeatureDataset& data, double test_fraction, std::uint64_t seed);

}  // namespace sdlab
