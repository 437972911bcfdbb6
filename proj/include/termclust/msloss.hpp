#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "termclust/matrix.hpp"

namespace termclust {

/// Multi-Similarity loss hyperparameters.
struct LossHyper {
    double alpha = 2.0;    ///< positive scale
    double beta = 50.0;    ///< negative scale
    double lambda = 1.0;   ///< similarity margin
    double epsilon = 0.1;  ///< mining slack

    void validate() const;
};

/// Mined positive and negative partner indices per anchor.
struct MinedPairs {
    std::vector<std::vector<std::uint32_t>> positives;
    std::vector<std::vector<std::uint32_t>> negatives;

    std::size_t anchors() const noexcept { return positives.size(); }
    bool all_empty() const noexcept;
};

/// Loss averaging denominator for a batch: every entry is an anchor.
inline double loss_denominator(std::size_t batch_entries) { return static_cast<double>(batch_entries); }

/// S = E E^T for unit-norm rows.
Matrix<double> pairwise_sims(const Matrix<double>& embeddings);

/// Same product through the dispatched float kernel, widened to double.
Matrix<double> pairwise_sims(const Matrix<float>& embeddings);

/// N_i = { j : c_j != c_i, S_ij > min_{k != i, c_k = c_i} S_ik - eps }
/// P_i = { j != i : c_j = c_i, S_ij < max_{c_k != c_i} S_ik + eps }
/// Anchors without a same-label partner or without a different-label entry
/// get empty sets.
MinedPairs mine_pairs(const Matrix<double>& sims, std::span<const std::uint32_t> labels, double epsilon);

/// (1/D) sum_i [ log(1 + sum_P exp(-alpha (S_ij - lambda))) / alpha
///             + log(1 + sum_N exp( beta (S_ij - lambda))) / beta ]
double ms_loss(const Matrix<double>& sims, const MinedPairs& pairs, const LossHyper& hyper, double denominator);
double ms_loss(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper);

/// dL/dS with the mined sets held fixed. Zero outside mined pairs.
Matrix<double> ms_loss_grad(const Matrix<double>& sims, const MinedPairs& pairs, const LossHyper& hyper,
                            double denominator);
Matrix<double> ms_loss_grad(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper);

struct LossEval {
    double loss = 0.0;
    Matrix<double> grad;
    MinedPairs pairs;
};

/// Mining, loss and gradient in one pass; denominator = loss_denominator(batch size).
LossEval ms_loss_and_grad(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper);

/// dL/dE = (G + G^T) E for S = E E^T.
Matrix<double> backprop_to_embeddings(const Matrix<double>& grad_sims, const Matrix<double>& embeddings);

}  // namespace termclust
