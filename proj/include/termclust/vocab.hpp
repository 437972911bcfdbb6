#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace termclust {

using TermId = std::uint32_t;

struct Term {
    TermId id = 0;
    std::string surface;
    std::string concept_id;

    bool operator==(const Term&) const = default;
};

/// Ordered term list. Term ids are dense and equal to the position.
class Vocabulary {
public:
    /// Appends a term and returns its id.
    TermId add(std::string concept_id, std::string surface);

    std::size_t size() const noexcept { return terms_.size(); }
    bool empty() const noexcept { return terms_.empty(); }
    const Term& operator[](TermId id) const { return terms_[id]; }
    const std::vector<Term>& terms() const noexcept { return terms_; }

    std::vector<std::string> surfaces() const;

    bool operator==(const Vocabulary&) const = default;

private:
    std::vector<Term> terms_;
};

/// Ground-truth partition of term ids by concept.
struct ClusterMap {
    std::vector<std::string> concept_ids;            ///< cluster index -> concept id, first-appearance order
    std::vector<std::vector<TermId>> members;        ///< cluster index -> sorted term ids
    std::vector<std::uint32_t> cluster_of;           ///< term id -> cluster index
    std::unordered_map<std::string, std::uint32_t> index;  ///< concept id -> cluster index
    std::size_t singleton_count = 0;

    std::size_t term_count() const noexcept { return cluster_of.size(); }
    std::size_t cluster_count() const noexcept { return members.size(); }

    /// Members of a concept, or nullptr if the concept is unknown.
    const std::vector<TermId>* find(std::string_view concept_id) const;

    std::size_t max_cluster_size() const noexcept;
    /// Sum over clusters of |C|(|C|-1)/2.
    std::uint64_t true_pair_count() const noexcept;
};

/// Unicode compatibility normalization (NFKC) followed by lowercasing.
std::string normalize_surface(std::string_view surface);

/// Reads `concept_id<TAB>surface` lines. Blank lines are skipped.
Vocabulary load_vocabulary(const std::filesystem::path& path, bool normalize = true);

/// Parses the same format from memory; `source` names the input in errors.
Vocabulary parse_vocabulary(std::string_view text, bool normalize = true, std::string_view source = "<memory>");

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
std::string format_vocabulary(const Vocabulary& vocab);

ClusterMap concept_clusters(const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Synthetic vocabularies with hard-negative concept families

enum class VariantKind { numeric_qualifier, suffix_token, body_part_token, abbreviation };

std::string_view variant_kind_name(VariantKind kind) noexcept;
VariantKind parse_variant_kind(std::string_view name);

struct SynthSpec {
    std::size_t concept_count = 5000;
    std::size_t synonyms_min = 2;
    std::size_t synonyms_max = 6;
    double hard_family_fraction = 0.5;
    std::set<VariantKind> variant_kinds{VariantKind::numeric_qualifier, VariantKind::suffix_token,
                                        VariantKind::body_part_token, VariantKind::abbreviation};
    std::uint64_t rng_seed = 42;

    void validate() const;
};

struct SynthVocabulary {
    Vocabulary vocab;
    ClusterMap clusters;
    std::vector<std::string> concept_base;  ///< per concept, indexed like clusters
    std::vector<std::int32_t> family_of;    ///< per concept, -1 when not in a hard family
};

SynthVocabulary synth_vocabulary(const SynthSpec& spec);

}  // namespace termclust
