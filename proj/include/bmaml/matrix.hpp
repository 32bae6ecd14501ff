#pragma once

#include <vector>

#include "bmaml/errors.hpp"

namespace bmaml {

/// Dense row-major matrix of doubles. Small and dumb on purpose; the heavy
/// lifting happens in the graph engine and the kernels.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }

    int size() const { return rows * cols; }
};

/// Supervised dataset: N inputs of dimension d_in with either real-valued
/// targets (regression) or class labels (classification).
struct Dataset {
    Matrix inputs;            // N x d_in
    Matrix targets;           // N x d_out, regression only
    std::vector<int> labels;  // N, classification only

    int size() const { return inputs.rows; }
    bool classification() const { return !labels.empty(); }

    void check() const {
        if (classification()) {
            if (static_cast<int>(labels.size()) != inputs.rows)
                throw ContractError("Dataset: label count does not match input rows");
        } else if (targets.rows != inputs.rows) {
            throw ContractError("Dataset: target rows do not match input rows");
        }
    }
};

/// Concatenate two datasets of identical schema (used for the leader target).
inline Dataset concat(const Dataset& a, const Dataset& b) {
    Dataset out;
    out.inputs = Matrix(a.inputs.rows + b.inputs.rows, a.inputs.cols);
    for (int i = 0; i < a.inputs.rows; ++i)
        for (int j = 0; j < a.inputs.cols; ++j) out.inputs.at(i, j) = a.inputs.at(i, j);
    for (int i = 0; i < b.inputs.rows; ++i)
        for (int j = 0; j < b.inputs.cols; ++j) out.inputs.at(a.inputs.rows + i, j) = b.inputs.at(i, j);
    if (a.classification()) {
        out.labels = a.labels;
        out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    } else {
        out.targets = Matrix(a.targets.rows + b.targets.rows, a.targets.cols);
        for (int i = 0; i < a.targets.rows; ++i)
            for (int j = 0; j < a.targets.cols; ++j) out.targets.at(i, j) = a.targets.at(i, j);
        for (int i = 0; i < b.targets.rows; ++i)
            for (int j = 0; j < b.targets.cols; ++j)
                out.targets.at(a.targets.rows + i, j) = b.targets.at(i, j);
    }
    return out;
}

/// One meta-learning task: K-shot train set, validation set, test set.
struct Task {
    Dataset trn;
    Dataset val;
    Dataset tst;
};

}  // namespace bmaml
