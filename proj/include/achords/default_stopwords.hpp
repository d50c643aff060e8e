#pragma once

#include <array>
#include <string_view>

namespace achords {

namespace detail {
using namespace std::string_view_literals;

// Mirrors data/stopwords_en.txt; a unit test keeps the two in sync.
inline constexpr std::array kDefaultStopwordList = {
    "a"sv, "about"sv, "above"sv, "after"sv, "again"sv, "against"sv, "all"sv, "am"sv,
    "an"sv, "and"sv, "any"sv, "are"sv, "as"sv, "at"sv, "be"sv, "because"sv,
    "been"sv, "before"sv, "being"sv, "below"sv, "between"sv, "both"sv, "but"sv, "by"sv,
    "can"sv, "could"sv, "did"sv, "do"sv, "does"sv, "doing"sv, "down"sv, "during"sv,
    "each"sv, "few"sv, "for"sv, "from"sv, "further"sv, "had"sv, "has"sv, "have"sv,
    "having"sv, "he"sv, "her"sv, "here"sv, "hers"sv, "herself"sv, "him"sv, "himself"sv,
    "his"sv, "how"sv, "i"sv, "if"sv, "in"sv, "into"sv, "is"sv, "it"sv,
    "its"sv, "itself"sv, "just"sv, "me"sv, "more"sv, "most"sv, "my"sv, "myself"sv,
    "no"sv, "nor"sv, "not"sv, "now"sv, "of"sv, "off"sv, "on"sv, "once"sv,
    "only"sv, "or"sv, "other"sv, "our"sv, "ours"sv, "ourselves"sv, "out"sv, "over"sv,
    "own"sv, "same"sv, "she"sv, "should"sv, "so"sv, "some"sv, "such"sv, "than"sv,
    "that"sv, "the"sv, "their"sv, "theirs"sv, "them"sv, "themselves"sv, "then"sv, "there"sv,
    "these"sv, "they"sv, "this"sv, "those"sv, "through"sv, "to"sv, "too"sv, "under"sv,
    "until"sv, "up"sv, "very"sv, "was"sv, "we"sv, "were"sv, "what"sv, "when"sv,
    "where"sv, "which"sv, "while"sv, "who"sv, "whom"sv, "why"sv, "will"sv, "with"sv,
    "would"sv, "you"sv, "your"sv, "yours"sv, "yourself"sv, "yourselves"sv,
};
} // namespace detail

inline constexpr const auto &kDefaultStopwords = detail::kDefaultStopwordList;

} // namespace achords
