#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "termclust/error.hpp"
#include "termclust/rng.hpp"
#include "termclust/vocab.hpp"

namespace termclust {

namespace {

constexpr std::string_view consonants = "bcdfghklmnprstvz";
constexpr std::string_view vowels = "aeiou";

// Shared vocabulary: many concepts reuse these, producing medium-hard negatives.
constexpr std::array<std::string_view, 24> head_nouns = {
    "disease",  "syndrome",  "carcinoma", "protein",   "receptor", "deficiency", "infection", "gene",
    "disorder", "lesion",    "fracture",  "neoplasm",  "kinase",   "antigen",    "virus",     "injury",
    "factor",   "inhibitor", "pain",      "ulcer",     "cyst",     "toxicity",   "enzyme",    "tumor"};
constexpr std::array<std::string_view, 16> modifiers = {
    "acute", "chronic", "primary", "secondary", "benign", "malignant", "congenital", "familial",
    "mild",  "severe",  "viral",   "bacterial", "hereditary", "juvenile", "focal", "diffuse"};
constexpr std::array<std::string_view, 8> fillers = {"nos", "disorder", "finding", "unspecified",
                                                     "condition", "(disorder)", "type", "status"};
constexpr std::array<std::string_view, 14> body_parts = {"left",   "right",  "upper",    "lower",  "early",
                                                         "late",   "renal",  "hepatic",  "cardiac", "pulmonary",
                                                         "ocular", "dermal", "anterior", "posterior"};

using Tokens = std::vector<std::string>;

std::string join(const Tokens& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

std::string random_word(Rng& rng) {
    const auto syllables = rng.between(2, 4);
    std::string w;
    for (std::int64_t s = 0; s < syllables; ++s) {
        w += consonants[rng.below(consonants.size())];
        w += vowels[rng.below(vowels.size())];
    }
    if (rng.uniform() < 0.5) w += consonants[rng.below(consonants.size())];
    return w;
}

Tokens random_base(Rng& rng) {
    Tokens t;
    if (rng.uniform() < 0.4) t.emplace_back(modifiers[rng.below(modifiers.size())]);
    t.push_back(random_word(rng));
    if (rng.uniform() < 0.5) t.push_back(random_word(rng));
    if (rng.uniform() < 0.6) t.emplace_back(head_nouns[rng.below(head_nouns.size())]);
    return t;
}

// Unrelated name for the same concept: fresh words throughout, same length.
Tokens alias_of(const Tokens& base, Rng& rng) {
    Tokens t;
    for (std::size_t i = 0; i < base.size(); ++i) t.push_back(random_word(rng));
    return t;
}

// Synonym transformations of a base token list.
enum class Transform { identity, rotate, plural, truncate, filler, acronym, rotate_plural, filler_truncate, alias };

Tokens apply(Transform tr, const Tokens& base, Rng& rng) {
    Tokens t = base;
    auto pluralize = [](std::string& w) { w += (w.back() == 's') ? "es" : "s"; };
    auto truncate_longest = [](Tokens& toks) {
        auto it = std::max_element(toks.begin(), toks.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
        if (it->size() > 5) it->resize(4);
    };
    switch (tr) {
        case Transform::identity:
            break;
        case Transform::rotate:
            if (t.size() > 1) std::rotate(t.begin(), t.end() - 1, t.end());
            break;
        case Transform::plural:
            pluralize(t.back());
            break;
        case Transform::truncate:
            truncate_longest(t);
            break;
        case Transform::filler:
            t.emplace_back(fillers[rng.below(fillers.size())]);
            break;
        case Transform::acronym: {
            if (t.size() < 2) {
                t.back().resize(std::min<std::size_t>(t.back().size(), 3));
                break;
            }
            std::string acr;
            for (const auto& w : t) acr += w.front();
            t = Tokens{acr};
            break;
        }
        case Transform::rotate_plural:
            if (t.size() > 1) std::rotate(t.begin(), t.end() - 1, t.end());
            pluralize(t.back());
            break;
        case Transform::filler_truncate:
            truncate_longest(t);
            t.emplace_back(fillers[rng.below(fillers.size())]);
            break;
        case Transform::alias:
            t = alias_of(base, rng);
            break;
    }
    return t;
}

// Distinct transformed surfaces of a base, identity first.
std::vector<Tokens> synonym_bases(const Tokens& base, std::size_t count, Rng& rng) {
    // alias appears three times: textually unrelated synonyms should be common
    std::vector<Transform> order = {Transform::rotate,  Transform::plural,        Transform::truncate,
                                    Transform::filler,  Transform::acronym,       Transform::rotate_plural,
                                    Transform::filler_truncate, Transform::alias, Transform::alias, Transform::alias};
    rng.shuffle(order.begin(), order.end());
    std::vector<Tokens> out{base};
    std::unordered_set<std::string> seen{join(base)};
    for (Transform tr : order) {
        if (out.size() >= count) break;
        Tokens t = apply(tr, base, rng);
        if (seen.insert(join(t)).second) out.push_back(std::move(t));
    }
    return out;
}

struct Qualifier {
    bool prefix = false;
    std::vector<std::string> tokens;  // one per family member, pairwise distinct
};

Qualifier family_qualifier(VariantKind kind, std::size_t members, Rng& rng) {
    Qualifier q;
    std::vector<std::string> pool;
    switch (kind) {
        case VariantKind::numeric_qualifier: {
            const bool type_style = rng.uniform() < 0.5;
            q.prefix = type_style;
            for (int d = 1; d <= 9; ++d) pool.push_back(type_style ? "type " + std::to_string(d) : std::to_string(d));
            break;
        }
        case VariantKind::suffix_token:
            for (char a : std::string_view("bcdghjkr"))
                for (char b : std::string_view("123abg")) pool.push_back(std::string{a, b});
            break;
        case VariantKind::body_part_token:
            q.prefix = true;
            for (auto b : body_parts) pool.emplace_back(b);
            break;
        case VariantKind::abbreviation: {
            const std::string stem{consonants[rng.below(consonants.size())], consonants[rng.below(consonants.size())]};
            for (int d = 1; d <= 12; ++d) pool.push_back(stem + std::to_string(d));
            break;
        }
    }
    rng.shuffle(pool.begin(), pool.end());
    q.tokens.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(members));
    return q;
}

std::string qualify(const Tokens& t, const Qualifier& q, std::size_t member) {
    const std::string body = join(t);
    return q.prefix ? q.tokens[member] + " " + body : body + " " + q.tokens[member];
}

}  // namespace

std::string_view variant_kind_name(VariantKind kind) noexcept {
    switch (kind) {
        case VariantKind::numeric_qualifier:
            return "numeric-qualifier";
        case VariantKind::suffix_token:
            return "suffix-token";
        case VariantKind::body_part_token:
            return "body-part-token";
        case VariantKind::abbreviation:
            return "abbreviation";
    }
    return "unknown";
}

VariantKind parse_variant_kind(std::string_view name) {
    for (auto k : {VariantKind::numeric_qualifier, VariantKind::suffix_token, VariantKind::body_part_token,
                   VariantKind::abbreviation}) {
        if (variant_kind_name(k) == name) return k;
    }
    fail_validation("unknown variant kind '" + std::string(name) + "'");
}

void SynthSpec::validate() const {
    if (concept_count < 2) fail_validation("synth: concept_count must be >= 2");
    if (synonyms_min < 1) fail_validation("synth: synonyms min must be >= 1");
    if (synonyms_max < synonyms_min) fail_validation("synth: synonyms max must be >= min");
    if (!(hard_family_fraction >= 0.0 && hard_family_fraction <= 1.0))
        fail_validation("synth: hard_family_fraction must be in [0, 1]");
    if (hard_family_fraction > 0.0 && variant_kinds.empty())
        fail_validation("synth: hard families need at least one variant kind");
}

SynthVocabulary synth_vocabulary(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.rng_seed);
    const std::vector<VariantKind> kinds(spec.variant_kinds.begin(), spec.variant_kinds.end());

    // Split the family share into groups of 2..4 concepts.
    auto family_concepts = static_cast<std::size_t>(std::llround(spec.hard_family_fraction * double(spec.concept_count)));
    std::vector<std::size_t> family_sizes;
    while (family_concepts >= 2) {
        std::size_t size = std::min<std::size_t>(static_cast<std::size_t>(rng.between(2, 4)), family_concepts);
        if (family_concepts - size == 1) size = (size == 4) ? 3 : size + 1;
        family_sizes.push_back(size);
        family_concepts -= size;
    }

    std::unordered_set<std::string> registry;
    auto fresh_base = [&] {
        for (;;) {
            Tokens base = random_base(rng);
            if (registry.insert(join(base)).second) return base;
        }
    };
    auto synonym_count = [&] {
        return static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.synonyms_min),
                                                    static_cast<std::int64_t>(spec.synonyms_max)));
    };

    struct Generated {
        std::string base;
        std::int32_t family;
        std::vector<std::string> surfaces;
    };
    std::vector<Generated> concepts;
    concepts.reserve(spec.concept_count);

    for (std::size_t f = 0; f < family_sizes.size(); ++f) {
        const Tokens base = fresh_base();
        const auto kind = kinds[rng.below(kinds.size())];
        const Qualifier q = family_qualifier(kind, family_sizes[f], rng);
        std::vector<std::size_t> counts(family_sizes[f]);
        for (auto& c : counts) c = synonym_count();
        // one transform sequence per family, so i-th synonyms differ only in the qualifier
        const auto bases = synonym_bases(base, *std::max_element(counts.begin(), counts.end()), rng);
        for (std::size_t member = 0; member < family_sizes[f]; ++member) {
            Generated g{join(base), static_cast<std::int32_t>(f), {}};
            for (std::size_t i = 0; i < std::min(counts[member], bases.size()); ++i)
                g.surfaces.push_back(qualify(bases[i], q, member));
            concepts.push_back(std::move(g));
        }
    }
    while (concepts.size() < spec.concept_count) {
        const Tokens base = fresh_base();
        Generated g{join(base), -1, {}};
        for (auto& t : synonym_bases(base, synonym_count(), rng)) g.surfaces.push_back(join(t));
        concepts.push_back(std::move(g));
    }

    // Interleave term order so ids carry no concept locality.
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (std::size_t c = 0; c < concepts.size(); ++c)
        for (std::size_t s = 0; s < concepts[c].surfaces.size(); ++s) order.emplace_back(c, s);
    rng.shuffle(order.begin(), order.end());

    const int width = static_cast<int>(std::to_string(concepts.size()).size());
    auto concept_name = [&](std::size_t c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "S%0*zu", width, c);
        return std::string(buf);
    };

    SynthVocabulary out;
    for (auto [c, s] : order) out.vocab.add(concept_name(c), concepts[c].surfaces[s]);
    out.clusters = concept_clusters(out.vocab);
    out.concept_base.resize(out.clusters.cluster_count());
    out.family_of.resize(out.clusters.cluster_count());
    for (std::size_t c = 0; c < concepts.size(); ++c) {
        const auto idx = out.clusters.index.at(concept_name(c));
        out.concept_base[idx] = concepts[c].base;
        out.family_of[idx] = concepts[c].family;
    }
    return out;
}

}  // namespace termclust
