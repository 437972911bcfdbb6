#include "termclust/msloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "termclust/error.hpp"
#include "termclust/simd.hpp"

namespace termclust {

namespace {

void check_finite(const Matrix<double>& m, const char* what) {
    for (double v : m.storage())
        if (!std::isfinite(v)) fail_numeric(std::string(what) + ": non-finite input");
}

// log(1 + sum_j exp(x_j)) and the weights exp(x_j) / (1 + sum), shifted for stability.
double log1p_sum_exp(std::span<const double> x, std::vector<double>* weights) {
    if (x.empty()) {
        if (weights) weights->clear();
        return 0.0;
    }
    double shift = 0.0;
    for (double v : x) shift = std::max(shift, v);
    double total = std::exp(-shift);
    for (double v : x) total += std::exp(v - shift);
    if (weights) {
        weights->resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) (*weights)[j] = std::exp(x[j] - shift) / total;
    }
    return shift + std::log(total);
}

struct AnchorTerms {
    std::vector<double> pos_x, neg_x;
};

void anchor_terms(const Matrix<double>& s, std::size_t i, const MinedPairs& pairs, const LossHyper& h, AnchorTerms& t) {
    t.pos_x.clear();
    t.neg_x.clear();
    for (auto j : pairs.positives[i]) t.pos_x.push_back(-h.alpha * (s(i, j) - h.lambda));
    for (auto j : pairs.negatives[i]) t.neg_x.push_back(h.beta * (s(i, j) - h.lambda));
}

void check_pairs(const Matrix<double>& sims, const MinedPairs& pairs, double denominator) {
    if (sims.rows() != sims.cols()) fail_validation("ms_loss: similarity matrix must be square");
    if (pairs.positives.size() != sims.rows() || pairs.negatives.size() != sims.rows())
        fail_validation("ms_loss: mined pairs do not match the batch size");
    if (!(denominator > 0.0)) fail_validation("ms_loss: denominator must be positive");
}

}  // namespace

void LossHyper::validate() const {
    if (!(alpha > 0.0)) fail_validation("loss: alpha must be > 0");
    if (!(beta > 0.0)) fail_validation("loss: beta must be > 0");
    if (!(epsilon >= 0.0)) fail_validation("loss: epsilon must be >= 0");
    if (!std::isfinite(lambda)) fail_validation("loss: lambda must be finite");
}

bool MinedPairs::all_empty() const noexcept {
    for (std::size_t i = 0; i < positives.size(); ++i)
        if (!positives[i].empty() || !negatives[i].empty()) return false;
    return true;
}

Matrix<double> pairwise_sims(const Matrix<double>& e) {
    check_finite(e, "pairwise_sims");
    const std::size_t n = e.rows();
    Matrix<double> s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < e.cols(); ++d) acc += e(i, d) * e(j, d);
            s(i, j) = acc;
            s(j, i) = acc;
        }
    }
    return s;
}

Matrix<double> pairwise_sims(const Matrix<float>& e) {
    for (float v : e.storage())
        if (!std::isfinite(v)) fail_numeric("pairwise_sims: non-finite input");
    const std::size_t n = e.rows();
    Matrix<float> block(n, n);
    if (n > 0) simd::kernels().dot_block(e.data(), n, e.data(), n, e.cols(), block.data(), n);
    Matrix<double> s(n, n);
    std::transform(block.storage().begin(), block.storage().end(), s.storage().begin(),
                   [](float v) { return static_cast<double>(v); });
    return s;
}

MinedPairs mine_pairs(const Matrix<double>& s, std::span<const std::uint32_t> labels, double epsilon) {
    const std::size_t n = labels.size();
    if (s.rows() != n || s.cols() != n) fail_validation("mine_pairs: labels and similarity matrix disagree in size");
    MinedPairs out;
    out.positives.resize(n);
    out.negatives.resize(n);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double min_pos = inf;
        double max_neg = -inf;
        bool has_pos = false;
        bool has_neg = false;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            if (labels[k] == labels[i]) {
                has_pos = true;
                min_pos = std::min(min_pos, s(i, k));
            } else {
                has_neg = true;
                max_neg = std::max(max_neg, s(i, k));
            }
        }
        if (!has_pos || !has_neg) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                if (s(i, j) < max_neg + epsilon) out.positives[i].push_back(static_cast<std::uint32_t>(j));
            } else if (s(i, j) > min_pos - epsilon) {
                out.negatives[i].push_back(static_cast<std::uint32_t>(j));
            }
        }
    }
    return out;
}

double ms_loss(const Matrix<double>& sims, const MinedPairs& pairs, const LossHyper& hyper, double denominator) {
    hyper.validate();
    check_finite(sims, "ms_loss");
    check_pairs(sims, pairs, denominator);
    double total = 0.0;
    AnchorTerms t;
    for (std::size_t i = 0; i < sims.rows(); ++i) {
        anchor_terms(sims, i, pairs, hyper, t);
        total += log1p_sum_exp(t.pos_x, nullptr) / hyper.alpha + log1p_sum_exp(t.neg_x, nullptr) / hyper.beta;
    }
    return total / denominator;
}

double ms_loss(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper) {
    check_finite(sims, "ms_loss");
    return ms_loss(sims, mine_pairs(sims, labels, hyper.epsilon), hyper, loss_denominator(labels.size()));
}

Matrix<double> ms_loss_grad(const Matrix<double>& sims, const MinedPairs& pairs, const LossHyper& hyper,
                            double denominator) {
    hyper.validate();
    check_finite(sims, "ms_loss_grad");
    check_pairs(sims, pairs, denominator);
    Matrix<double> g(sims.rows(), sims.cols());
    AnchorTerms t;
    std::vector<double> w;
    for (std::size_t i = 0; i < sims.rows(); ++i) {
        anchor_terms(sims, i, pairs, hyper, t);
        // d/dS of log(1+sum exp(-a(S-l)))/a is -weight; of log(1+sum exp(b(S-l)))/b is +weight
        log1p_sum_exp(t.pos_x, &w);
        for (std::size_t p = 0; p < w.size(); ++p) g(i, pairs.positives[i][p]) -= w[p] / denominator;
        log1p_sum_exp(t.neg_x, &w);
        for (std::size_t q = 0; q < w.size(); ++q) g(i, pairs.negatives[i][q]) += w[q] / denominator;
    }
    return g;
}

Matrix<double> ms_loss_grad(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper) {
    check_finite(sims, "ms_loss_grad");
    return ms_loss_grad(sims, mine_pairs(sims, labels, hyper.epsilon), hyper, loss_denominator(labels.size()));
}

LossEval ms_loss_and_grad(const Matrix<double>& sims, std::span<const std::uint32_t> labels, const LossHyper& hyper) {
    check_finite(sims, "ms_loss");
    LossEval out;
    out.pairs = mine_pairs(sims, labels, hyper.epsilon);
    const double denominator = loss_denominator(labels.size());
    out.loss = ms_loss(sims, out.pairs, hyper, denominator);
    out.grad = ms_loss_grad(sims, out.pairs, hyper, denominator);
    return out;
}

Matrix<double> backprop_to_embeddings(const Matrix<double>& g, const Matrix<double>& e) {
    if (g.rows() != g.cols() || g.rows() != e.rows()) fail_validation("backprop_to_embeddings: shape mismatch");
    const std::size_t n = e.rows();
    const std::size_t dim = e.cols();
    Matrix<double> out(n, dim);
    // mined gradients are sparse; skip zero entries
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = g(i, j);
            if (v == 0.0) continue;
            // S_ij = e_i . e_j: contributes v e_j to row i and v e_i to row j
            for (std::size_t d = 0; d < dim; ++d) {
                out(i, d) += v * e(j, d);
                out(j, d) += v * e(i, d);
            }
        }
    }
    return out;
}

}  // namespace termclust
