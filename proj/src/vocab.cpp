#include "termclust/vocab.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "termclust/binary_io.hpp"
#include "termclust/error.hpp"
#include "termclust/utf8.hpp"

namespace termclust {

TermId Vocabulary::add(std::string concept_id, std::string surface) {
    const auto id = static_cast<TermId>(terms_.size());
    terms_.push_back(Term{id, std::move(surface), std::move(concept_id)});
    return id;
}

std::vector<std::string> Vocabulary::surfaces() const {
    std::vector<std::string> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(t.surface);
    return out;
}

const std::vector<TermId>* ClusterMap::find(std::string_view concept_id) const {
    const auto it = index.find(std::string(concept_id));
    return it == index.end() ? nullptr : &members[it->second];
}

std::size_t ClusterMap::max_cluster_size() const noexcept {
    std::size_t best = 0;
    for (const auto& m : members) best = std::max(best, m.size());
    return best;
}

std::uint64_t ClusterMap::true_pair_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto& m : members) total += static_cast<std::uint64_t>(m.size()) * (m.size() - 1) / 2;
    return total;
}

std::string normalize_surface(std::string_view surface) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status)) fail_data("ICU NFKC normalizer unavailable");
    const auto input = icu::UnicodeString::fromUTF8(icu::StringPiece(surface.data(), static_cast<int32_t>(surface.size())));
    icu::UnicodeString normalized = nfkc->normalize(input, status);
    if (U_FAILURE(status)) fail_data("normalization failed for '" + std::string(surface) + "'");
    normalized.toLower(icu::Locale::getRoot());
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

Vocabulary parse_vocabulary(std::string_view text, bool normalize, std::string_view source) {
    Vocabulary vocab;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        const auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) fail_data(where() + "expected concept_id<TAB>surface");
        const std::string_view concept_id = line.substr(0, tab);
        const std::string_view surface = line.substr(tab + 1);
        if (concept_id.empty()) fail_data(where() + "empty concept id");
        if (surface.empty()) fail_data(where() + "empty surface");
        if (!utf8::valid(line)) fail_data(where() + "invalid UTF-8");

        std::string stored = normalize ? normalize_surface(surface) : std::string(surface);
        if (stored.empty()) fail_data(where() + "surface empty after normalization");
        vocab.add(std::string(concept_id), std::move(stored));
    }
    if (vocab.empty()) fail_data(std::string(source) + ": no terms");
    return vocab;
}

Vocabulary load_vocabulary(const std::filesystem::path& path, bool normalize) {
    auto in = io::open_in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_vocabulary(buf.str(), normalize, path.string());
}

std::string format_vocabulary(const Vocabulary& vocab) {
    std::string out;
    for (const auto& t : vocab.terms()) {
        out += t.concept_id;
        out += '\t';
        out += t.surface;
        out += '\n';
    }
    return out;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
    auto out = io::open_out(path);
    const std::string text = format_vocabulary(vocab);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail_validation("write failed: " + path.string());
}

ClusterMap concept_clusters(const Vocabulary& vocab) {
    ClusterMap map;
    map.cluster_of.resize(vocab.size());
    for (const auto& t : vocab.terms()) {
        auto [it, inserted] = map.index.try_emplace(t.concept_id, static_cast<std::uint32_t>(map.members.size()));
        if (inserted) {
            map.concept_ids.push_back(t.concept_id);
            map.members.emplace_back();
        }
        map.members[it->second].push_back(t.id);
        map.cluster_of[t.id] = it->second;
    }
    // ids are appended in increasing order, so each member list is already sorted
    map.singleton_count = static_cast<std::size_t>(
        std::count_if(map.members.begin(), map.members.end(), [](const auto& m) { return m.size() == 1; }));
    return map;
}

}  // namespace termclust
