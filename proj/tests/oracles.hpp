#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls the code path it checks.

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <set>

#include "termclust/clustereval.hpp"
#include "termclust/encoder.hpp"
#include "termclust/msloss.hpp"
#include "termclust/simindex.hpp"
#include "test_util.hpp"

namespace termclust::oracle {

using hp = boost::multiprecision::cpp_bin_float_50;

/// Full sort of every row with the stored pair similarity and the
/// (sim desc, id asc) rule.
inline NeighborTable full_sort_table(const Matrix<float>& e, std::size_t m) {
    const std::size_t n = e.rows();
    NeighborTable t{n, m, std::vector<TermId>(n * m), std::vector<float>(n * m)};
    std::vector<std::pair<float, TermId>> all;
    for (std::size_t i = 0; i < n; ++i) {
        all.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) all.emplace_back(stored_similarity(e.row(i), e.row(j)), static_cast<TermId>(j));
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t r = 0; r < m; ++r) {
            t.ids[i * m + r] = all[r].second;
            t.sims[i * m + r] = all[r].first;
        }
    }
    return t;
}

/// Pair counts straight from a table and the labels, one pair at a time.
inline EvalReport enumerate_counts(const NeighborTable& t, const ClusterMap& c, double theta) {
    std::set<TermPair> predicted;
    for (std::size_t i = 0; i < t.n; ++i)
        for (std::size_t r = 0; r < t.m; ++r)
            if (t.row_sims(i)[r] > theta) {
                const TermId a = static_cast<TermId>(i), b = t.row_ids(i)[r];
                predicted.insert({std::min(a, b), std::max(a, b)});
            }
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (TermId i = 0; i < t.n; ++i)
        for (TermId j = i + 1; j < t.n; ++j) {
            const bool pred = predicted.count({i, j}) > 0;
            const bool same = c.cluster_of[i] == c.cluster_of[j];
            (pred ? (same ? tp : fp) : (same ? fn : tn)) += 1;
        }
    return make_report(theta, tp, fp, fn, tn);
}

struct RandomBatch {
    Matrix<double> emb;
    std::vector<std::uint32_t> labels;
};

/// Unit rows in a low dimension with same-label rows pulled toward a shared
/// direction, so both mined sets are usually populated.
inline RandomBatch random_batch(Rng& rng, std::size_t n, std::size_t label_count, std::size_t dim = 6) {
    RandomBatch rb{Matrix<double>(n, dim), std::vector<std::uint32_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        rb.labels[i] = static_cast<std::uint32_t>(i < label_count ? i : rng.below(label_count));
        double norm = 0.0;
        for (auto& v : rb.emb.row(i)) {
            v = rng.normal();
            norm += v * v;
        }
        for (auto& v : rb.emb.row(i)) v /= std::sqrt(norm);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lead = rb.labels[i];
        if (lead == i) continue;
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            rb.emb(i, d) = rb.emb(i, d) + 0.8 * rb.emb(lead, d);
            norm += rb.emb(i, d) * rb.emb(i, d);
        }
        for (auto& v : rb.emb.row(i)) v /= std::sqrt(norm);
    }
    return rb;
}

/// Mining rule and loss formula evaluated directly in 50 significant digits.
inline hp ms_loss_hp(const Matrix<double>& S, const std::vector<std::uint32_t>& labels, const LossHyper& h) {
    const std::size_t n = labels.size();
    const hp alpha = h.alpha, beta = h.beta, lambda = h.lambda, eps = h.epsilon;
    hp total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool has_pos = false, has_neg = false;
        hp min_pos = 10, max_neg = -10;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            const hp s = S(i, k);
            if (labels[k] == labels[i]) {
                has_pos = true;
                min_pos = std::min(min_pos, s);
            } else {
                has_neg = true;
                max_neg = std::max(max_neg, s);
            }
        }
        if (!has_pos || !has_neg) continue;
        hp pos_sum = 0, neg_sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const hp s = S(i, j);
            if (labels[j] == labels[i] && s < max_neg + eps) pos_sum += exp(-alpha * (s - lambda));
            if (labels[j] != labels[i] && s > min_pos - eps) neg_sum += exp(beta * (s - lambda));
        }
        total += log1p(pos_sum) / alpha + log1p(neg_sum) / beta;
    }
    return total / hp(n);
}

inline bool same_sets(const MinedPairs& a, const MinedPairs& b) {
    return a.positives == b.positives && a.negatives == b.negatives;
}

/// Relative error |got - ref| / |ref| in 50 digits; 0 when both are 0.
inline double relative_error(double got, const hp& ref) {
    if (ref == 0) return got == 0.0 ? 0.0 : 1.0;
    return static_cast<double>(abs((hp(got) - ref) / ref));
}

/// ||fd - analytic|| / ||fd|| of ms_loss_grad over every off-diagonal S entry
/// whose mined sets survive a +-step perturbation. Returns -1 when no entry
/// had a nonzero reference.
inline double sims_grad_fd_error(const Matrix<double>& S, const std::vector<std::uint32_t>& labels,
                                 const LossHyper& h, double step = 1e-6, std::size_t* skipped = nullptr) {
    const auto pairs = mine_pairs(S, labels, h.epsilon);
    const double D = loss_denominator(labels.size());
    const auto G = ms_loss_grad(S, pairs, h, D);
    const std::size_t n = labels.size();
    double diff_sq = 0.0, ref_sq = 0.0;
    auto probe = S;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double orig = probe(i, j);
            probe(i, j) = orig + step;
            const bool up_ok = same_sets(mine_pairs(probe, labels, h.epsilon), pairs);
            const double up = ms_loss(probe, pairs, h, D);
            probe(i, j) = orig - step;
            const bool down_ok = same_sets(mine_pairs(probe, labels, h.epsilon), pairs);
            const double down = ms_loss(probe, pairs, h, D);
            probe(i, j) = orig;
            if (!up_ok || !down_ok) {
                if (skipped) ++*skipped;
                continue;
            }
            const double fd = (up - down) / (2 * step);
            diff_sq += (fd - G(i, j)) * (fd - G(i, j));
            ref_sq += fd * fd;
        }
    return ref_sq > 0 ? std::sqrt(diff_sq / ref_sq) : -1.0;
}

/// Encoder -> similarities -> MS loss, entirely in double, over a table
/// held as Matrix<double>.
struct DoubleChain {
    const EncoderConfig& config;
    std::vector<std::vector<std::uint32_t>> features;  ///< per batch entry
    std::vector<std::uint32_t> labels;
    LossHyper hyper;

    Matrix<double> embed(const Matrix<double>& table) const {
        Matrix<double> e(features.size(), config.dim);
        for (std::size_t i = 0; i < features.size(); ++i) {
            EncodeTrace tr;
            tr.features = features[i];
            detail::encode_features(table.data(), config.dim, tr.features, tr);
            std::copy(tr.unit.begin(), tr.unit.end(), e.row(i).begin());
        }
        return e;
    }
    MinedPairs mine(const Matrix<double>& table) const {
        return mine_pairs(pairwise_sims(embed(table)), labels, hyper.epsilon);
    }
    double loss(const Matrix<double>& table, const MinedPairs& pairs) const {
        return ms_loss(pairwise_sims(embed(table)), pairs, hyper, loss_denominator(labels.size()));
    }
    SparseRowGrad analytic_grad(const Matrix<double>& table, const MinedPairs& pairs) const {
        const auto E = embed(table);
        const auto G = ms_loss_grad(pairwise_sims(E), pairs, hyper, loss_denominator(labels.size()));
        const auto dE = backprop_to_embeddings(G, E);
        SparseRowGrad out(config.dim);
        for (std::size_t i = 0; i < features.size(); ++i) {
            EncodeTrace tr;
            tr.features = features[i];
            detail::encode_features(table.data(), config.dim, tr.features, tr);
            encode_grad(tr, dE.row(i), out);
        }
        return out;
    }
    /// Central differences over every table entry in `rows`, skipping
    /// coordinates whose perturbation changes the mined sets.
    double fd_error(const Matrix<double>& table, const MinedPairs& pairs, const SparseRowGrad& analytic,
                    std::span<const std::uint32_t> rows, double step = 1e-6) const {
        double diff_sq = 0.0, ref_sq = 0.0;
        Matrix<double> probe = table;
        for (std::uint32_t r : rows)
            for (std::size_t d = 0; d < config.dim; ++d) {
                const double orig = probe(r, d);
                probe(r, d) = orig + step;
                const bool up_ok = same_sets(mine(probe), pairs);
                const double up = loss(probe, pairs);
                probe(r, d) = orig - step;
                const bool down_ok = same_sets(mine(probe), pairs);
                const double down = loss(probe, pairs);
                probe(r, d) = orig;
                if (!up_ok || !down_ok) continue;
                const double fd = (up - down) / (2 * step);
                diff_sq += (fd - analytic.at(r, d)) * (fd - analytic.at(r, d));
                ref_sq += fd * fd;
            }
        return ref_sq > 0 ? std::sqrt(diff_sq / ref_sq) : -1.0;
    }
};

inline Matrix<double> widen(const Matrix<float>& m) {
    Matrix<double> out(m.rows(), m.cols());
    std::copy(m.storage().begin(), m.storage().end(), out.storage().begin());
    return out;
}

}  // namespace termclust::oracle
