// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

/**
 * Deterministic synthetic prose.
 *
 * Produces lowercase, canonically spaced English-like narrative paragraphs
 * from a topic-conditioned probabilistic grammar. Each document draws a
 * topic, a secondary topic, a small cast of named characters and a set of
 * "favourite" words, so word choice depends on document-level intent that
 * a short-context n-gram model cannot see. This is the built-in human text
 * source for desk-scale experiments.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fastcurv/numeric.hpp"

namespace fastcurv::prose {

struct ProseConfig {
  std::uint64_t seed = 1;
  std::size_t documents = 100;
  std::size_t min_words = 180;
  std::size_t max_words = 260;
};

namespace detail {

inline std::vector<std::string> words_of(std::string_view list) {
  std::vector<std::string> out;
  std::istringstream in{std::string(list)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// Zipf-weighted word list: the i-th entry has weight 1/(i+1)^s.
class WordList {
 public:
  WordList() = default;
  WordList(std::vector<std::string> words, double exponent = 1.0) : words_(std::move(words)) {
    weights_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      weights_.push_back(1.0 / std::pow(static_cast<double>(i + 1), exponent));
    }
  }
  WordList(std::string_view list, double exponent = 1.0) : WordList(words_of(list), exponent) {}

  bool empty() const noexcept { return words_.empty(); }
  std::size_t size() const noexcept { return words_.size(); }
  const std::string& at(std::size_t i) const { return words_.at(i); }

  /// Weighted pick; indices in `boosted` get their weight multiplied.
  std::size_t pick_index(Rng& rng, const std::vector<std::size_t>& boosted = {}, double boost = 1.0) const {
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) total += weight(i, boosted, boost);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      u -= weight(i, boosted, boost);
      if (u < 0.0) return i;
    }
    return weights_.size() - 1;
  }
  const std::string& pick(Rng& rng, const std::vector<std::size_t>& boosted = {}, double boost = 1.0) const {
    return words_[pick_index(rng, boosted, boost)];
  }

 private:
  double weight(std::size_t i, const std::vector<std::size_t>& boosted, double boost) const {
    for (std::size_t b : boosted) {
      if (b == i) return weights_[i] * boost;
    }
    return weights_[i];
  }
  std::vector<std::string> words_;
  std::vector<double> weights_;
};

struct Topic {
  WordList nouns;        // singular
  WordList verbs;        // transitive, "base/past" or base (regular)
  WordList intransitive; // past tense
  WordList adjectives;
  WordList places;       // noun phrases without determiner
};

inline std::string plural(const std::string& noun) {
  static const std::vector<std::pair<std::string, std::string>> irregular = {
      {"man", "men"},       {"woman", "women"},   {"child", "children"}, {"foot", "feet"},
      {"tooth", "teeth"},   {"mouse", "mice"},    {"sheep", "sheep"},    {"fish", "fish"},
      {"deer", "deer"},     {"wolf", "wolves"},   {"knife", "knives"},   {"leaf", "leaves"},
      {"wife", "wives"},    {"life", "lives"},    {"shelf", "shelves"},  {"thief", "thieves"},
      {"half", "halves"},   {"loaf", "loaves"},   {"person", "people"},  {"goose", "geese"},
      {"ox", "oxen"},       {"calf", "calves"},   {"roof", "roofs"},     {"chief", "chiefs"},
      {"hero", "heroes"},   {"potato", "potatoes"}};
  for (const auto& [s, p] : irregular) {
    if (s == noun) return p;
  }
  const auto ends = [&](std::string_view suf) {
    return noun.size() >= suf.size() && noun.compare(noun.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("s") || ends("x") || ends("ch") || ends("sh") || ends("z")) return noun + "es";
  if (ends("y") && noun.size() > 1 && std::string_view("aeiou").find(noun[noun.size() - 2]) == std::string_view::npos) {
    return noun.substr(0, noun.size() - 1) + "ies";
  }
  return noun + "s";
}

struct Verb {
  std::string base;
  std::string past;
};

inline Verb parse_verb(const std::string& entry) {
  const auto slash = entry.find('/');
  if (slash != std::string::npos) return {entry.substr(0, slash), entry.substr(slash + 1)};
  const std::string& b = entry;
  if (!b.empty() && b.back() == 'e') return {b, b + "d"};
  if (b.size() > 1 && b.back() == 'y' && std::string_view("aeiou").find(b[b.size() - 2]) == std::string_view::npos) {
    return {b, b.substr(0, b.size() - 1) + "ied"};
  }
  return {b, b + "ed"};
}

inline bool starts_with_vowel(const std::string& w) {
  return !w.empty() && std::string_view("aeiou").find(w[0]) != std::string_view::npos;
}

struct Lexicon {
  std::vector<Topic> topics;
  WordList common_nouns{
      "man woman day night time hand eye face voice house friend thing place way moment door road light water "
      "money work name question answer reason idea word letter story family morning evening year heart mind "
      "child fire wind rain sound sign matter end side corner piece window table paper chance plan"};
  WordList common_verbs{
      "see/saw find/found take/took give/gave make/made hold/held bring/brought leave/left keep/kept hear/heard "
      "know/knew remember notice ask tell/told show want need like love carry lose/lost follow touch push pull "
      "throw/threw catch/caught break/broke hide/hid send/sent use answer finish start help call open close "
      "watch reach miss/missed"};
  WordList common_intransitive{
      "waited laughed smiled walked stopped listened hesitated returned stayed spoke paused nodded agreed moved "
      "arrived left ran fell rose cried disappeared slept sighed trembled wondered shouted whispered"};
  WordList common_adjectives{
      "old young new small large little long dark bright cold warm strange quiet loud kind proud poor rich "
      "brave careful angry happy sad tired clever simple heavy empty full beautiful red white black blue green "
      "broken hidden famous gentle"};
  WordList adverbs{
      "slowly quickly carefully quietly suddenly finally again gently loudly silently eagerly softly firmly "
      "nervously patiently calmly briefly steadily happily sadly"};
  WordList prepositions{
      "in on at near behind under over across through beside toward from with into along beyond around inside "
      "outside above below between"};
  WordList times{
      "in_the_morning at_dawn at_night that_evening the_next_day after_a_while before_long later in_the_end "
      "at_last for_a_moment by_noon in_winter in_the_spring every_day one_morning soon afterward meanwhile "
      "at_first that_summer long_ago"};
  WordList coordinators{"and but so yet"};
  WordList subordinators{"because when while after before until although since as though if once"};
  WordList reporting{"said/said thought/thought knew/knew hoped/hoped believed/believed feared/feared "
                     "explained/explained admitted/admitted remembered/remembered decided/decided"};
  WordList modals{"could would might should must"};
  WordList male_names{"thomas henry james william george samuel robert edward arthur walter frank peter john "
                      "charles daniel hugo"};
  WordList female_names{"mary anna elizabeth margaret clara alice emma grace ruth helen lucy sarah martha rose "
                        "ellen jane"};
  WordList towns{"london paris boston dover bristol lisbon vienna millbrook ashford riverton kingsport "
                 "westfield oakham"};
};

inline Topic make_topic(std::string_view nouns, std::string_view verbs, std::string_view intransitive,
                        std::string_view adjectives, std::string_view places) {
  return {WordList(nouns), WordList(verbs), WordList(intransitive), WordList(adjectives), WordList(places)};
}

inline const Lexicon& lexicon() {
  static const Lexicon lex = [] {
    Lexicon l;
    l.topics.push_back(make_topic(
        "ship boat sailor captain harbor wave storm island rope anchor deck sail tide shore lighthouse fisherman "
        "net whale gull mast crew cargo compass map current reef cabin oar lantern bay coast voyage dock cliff "
        "horizon shell wreck barrel keel",
        "steer tie haul row lower raise sight trade load mend spot/spotted sink/sank fix cross chase drop/dropped",
        "sailed drifted rowed floated vanished anchored capsized landed",
        "salty rough calm distant wooden grey stormy deep narrow crowded wet ancient silver windy",
        "the_harbor the_open_sea the_old_pier the_rocky_coast the_lighthouse the_fishing_village"));
    l.topics.push_back(make_topic(
        "farmer field barn cow horse sheep goat pig hen egg plow harvest wheat corn orchard apple fence gate seed "
        "soil mill cart hay pasture dog lamb calf meadow stable bucket basket shovel scarecrow crop garden vine "
        "root",
        "plant harvest feed/fed milk plow gather sell/sold water dig/dug build/built repair count fill cut/cut "
        "pick/picked herd store grow/grew",
        "worked rested grazed grew wandered toiled",
        "golden muddy dry ripe fresh broad fertile dusty sweet early tall wild",
        "the_farm the_north_field the_village the_market_town the_old_mill the_orchard"));
    l.topics.push_back(make_topic(
        "street market shop merchant crowd tower bridge square lamp coin clerk banker office carriage train "
        "station tavern inn alley roof chimney newspaper factory worker wall fountain statue bell clock guard "
        "theater ticket stranger neighbor landlord",
        "buy/bought rent pass deliver read/read write/wrote sign lock meet/met hire pay/paid paint visit "
        "print/printed ring/rang",
        "hurried gossiped shopped strolled bargained loitered",
        "busy noisy crowded narrow grand shabby wealthy foggy modern expensive crooked",
        "the_city the_market_square the_station the_old_quarter the_river_bank the_town_hall"));
    l.topics.push_back(make_topic(
        "tree oak pine wolf bear deer fox owl hunter path river stream cave stone moss branch leaf mushroom berry "
        "trail camp axe woodcutter hut clearing valley hill bird nest squirrel fog shadow thorn bush log",
        "track/tracked hunt chop/chopped climb/climbed gather light/lit cross/crossed follow trap/trapped "
        "mark/marked cut/cut burn",
        "howled rustled hunted camped hid roamed",
        "thick green dark wild silent tall hollow mossy ancient frozen deep",
        "the_forest the_old_woods the_valley the_river the_hills the_clearing"));
    l.topics.push_back(make_topic(
        "soldier general army battle sword shield fort castle king queen knight enemy flag drum camp siege arrow "
        "bow spear armor messenger border treaty victory wound prisoner guard captain cannon trench banner "
        "officer rider",
        "attack/attacked defend/defended capture/captured command/commanded order/ordered fight/fought "
        "surround/surrounded betray/betrayed guard/guarded wound/wounded march/marched besiege/besieged",
        "marched fought retreated surrendered charged advanced camped",
        "brave loyal cruel wounded fierce royal bloody proud exhausted victorious",
        "the_border the_castle the_battlefield the_fortress the_capital the_front"));
    l.topics.push_back(make_topic(
        "scientist laboratory experiment theory microscope sample chemical formula engine machine wire battery "
        "magnet planet star telescope notebook result student professor lecture method equation crystal gas "
        "liquid metal device signal instrument observation",
        "measure test/tested observe record prove/proved heat/heated mix/mixed design/designed calculate "
        "publish/published study/studied examine",
        "worked calculated experimented succeeded failed observed",
        "precise careful curious electric bright complex simple accurate famous strange",
        "the_laboratory the_university the_observatory the_workshop the_academy the_library"));
    l.topics.push_back(make_topic(
        "judge lawyer trial witness jury case verdict law crime thief evidence contract document court clerk "
        "senator vote election speech council mayor citizen tax debt ruling appeal petition sheriff",
        "accuse/accused defend/defended question/questioned sign/signed judge/judged sentence/sentenced "
        "elect/elected arrest/arrested argue/argued present/presented",
        "testified argued voted objected adjourned confessed",
        "guilty innocent honest public legal fair strict corrupt solemn formal",
        "the_courthouse the_council_chamber the_capital the_jail the_town_hall the_senate"));
    l.topics.push_back(make_topic(
        "mother father sister brother kitchen bread soup chair bed blanket candle kettle cup plate spoon knife "
        "oven cake pie dinner breakfast grandmother baby cat room stairs mirror garden clock",
        "cook/cooked bake/baked wash/washed sweep/swept fold/folded serve/served pour/poured clean/cleaned "
        "mend/mended set/set",
        "cooked slept played cried laughed sang",
        "warm cozy clean tiny sleepy sweet hungry familiar soft comfortable",
        "the_kitchen the_house the_cottage the_parlor the_garden the_attic"));
    l.topics.push_back(make_topic(
        "traveler mountain peak snow glacier guide mule tent ridge summit village cloud sun moon journey pack boot "
        "shelter lake pass slope avalanche rope trail",
        "climb/climbed cross/crossed reach/reached pack/packed carry/carried guide/guided pitch/pitched "
        "descend/descended",
        "climbed rested travelled slipped camped descended",
        "steep icy high distant frozen bright narrow lonely white rocky",
        "the_mountains the_high_pass the_summit the_valley the_lake the_border_village"));
    l.topics.push_back(make_topic(
        "teacher pupil school lesson book page song piano violin singer choir concert melody poem poet chalk desk "
        "library language ink pen class exam verse chorus",
        "teach/taught learn/learned read/read sing/sang play/played practice/practiced recite/recited "
        "compose/composed copy/copied study/studied",
        "studied sang played listened recited practiced",
        "difficult easy musical patient young clever famous beautiful old loud",
        "the_school the_music_hall the_classroom the_church the_library the_academy"));
    l.topics.push_back(make_topic(
        "doctor nurse patient fever medicine hospital wound bandage illness cure herb bottle pill heart pulse "
        "surgeon ward recovery symptom cough",
        "treat/treated cure/cured examine/examined heal/healed prescribe/prescribed bandage/bandaged "
        "visit/visited nurse/nursed",
        "recovered coughed worsened improved died rested",
        "sick pale healthy feverish weak gentle tired careful calm serious",
        "the_hospital the_ward the_clinic the_sickroom the_village the_infirmary"));
    l.topics.push_back(make_topic(
        "engineer railway track locomotive steam coal mine miner tunnel furnace iron steel hammer anvil smith "
        "forge wheel gear lever pipe valve boiler whistle engine",
        "forge/forged hammer/hammered repair/repaired build/built dig/dug fire/fired weld/welded oil/oiled "
        "drive/drove load/loaded",
        "worked hammered whistled rumbled stalled labored",
        "black heavy hot noisy rusty strong smoky powerful iron dirty",
        "the_mine the_railway_yard the_foundry the_forge the_tunnel the_factory"));
    return l;
  }();
  return lex;
}

/// Per-document state: topics, cast and favourite words.
class DocumentWriter {
 public:
  DocumentWriter(const Lexicon& lex, Rng& rng) : lex_(lex), rng_(rng) {
    topic_ = rng_.below(lex_.topics.size());
    secondary_ = rng_.below(lex_.topics.size());
    const std::size_t cast = 2 + rng_.below(2);
    for (std::size_t i = 0; i < cast; ++i) {
      const bool female = rng_.uniform() < 0.5;
      const WordList& names = female ? lex_.female_names : lex_.male_names;
      cast_.push_back({names.pick(rng_), female});
    }
    town_ = lex_.towns.pick(rng_);
    const Topic& t = lex_.topics[topic_];
    for (int i = 0; i < 6; ++i) fav_nouns_.push_back(rng_.below(t.nouns.size()));
    for (int i = 0; i < 3; ++i) fav_verbs_.push_back(rng_.below(t.verbs.size()));
    for (int i = 0; i < 4; ++i) fav_adjs_.push_back(rng_.below(t.adjectives.size()));
  }

  std::string write(std::size_t min_words, std::size_t max_words) {
    const std::size_t target = min_words + rng_.below(max_words - min_words + 1);
    words_ = 0;
    out_.clear();
    while (words_ < target) sentence();
    return out_;
  }

 private:
  struct Person {
    std::string name;
    bool female;
  };

  bool chance(double p) { return rng_.uniform() < p; }

  void emit(std::string_view w) {
    if (w == "." || w == "," || w == "?" || w == ";") {
      out_ += w;
      return;
    }
    if (!out_.empty()) out_.push_back(' ');
    for (char c : w) out_.push_back(c == '_' ? ' ' : c);
    for (char c : w) {
      if (c == '_') ++words_;
    }
    ++words_;
  }

  const Topic& topic() { return chance(0.8) ? lex_.topics[topic_] : lex_.topics[secondary_]; }

  std::string noun(bool* is_topic = nullptr) {
    if (chance(0.65)) {
      const bool primary = chance(0.8);
      const Topic& t = primary ? lex_.topics[topic_] : lex_.topics[secondary_];
      if (is_topic) *is_topic = true;
      return primary ? t.nouns.pick(rng_, fav_nouns_, 6.0) : t.nouns.pick(rng_);
    }
    if (is_topic) *is_topic = false;
    return lex_.common_nouns.pick(rng_);
  }

  std::string adjective() {
    if (chance(0.55)) {
      const bool primary = chance(0.8);
      const Topic& t = primary ? lex_.topics[topic_] : lex_.topics[secondary_];
      return primary ? t.adjectives.pick(rng_, fav_adjs_, 5.0) : t.adjectives.pick(rng_);
    }
    return lex_.common_adjectives.pick(rng_);
  }

  Verb transitive() {
    if (chance(0.55)) {
      const bool primary = chance(0.8);
      const Topic& t = primary ? lex_.topics[topic_] : lex_.topics[secondary_];
      return parse_verb(primary ? t.verbs.pick(rng_, fav_verbs_, 5.0) : t.verbs.pick(rng_));
    }
    return parse_verb(lex_.common_verbs.pick(rng_));
  }

  /// Noun phrase; returns true when plural.
  bool noun_phrase(bool allow_pp = true) {
    const bool pl = chance(0.25);
    std::vector<std::string> words;
    std::string n = noun();
    std::string adj;
    if (chance(0.4)) adj = adjective();
    const double d = rng_.uniform();
    if (pl) {
      if (d < 0.55) emit("the");
      else if (d < 0.7) emit("some");
      else if (d < 0.8) emit("many");
      else if (d < 0.88) emit("those");
      else if (d < 0.94) emit("two");
      else emit(cast_pronoun_possessive());
    } else {
      const std::string& first = adj.empty() ? n : adj;
      if (d < 0.58) emit("the");
      else if (d < 0.78) emit(starts_with_vowel(first) ? "an" : "a");
      else if (d < 0.85) emit("that");
      else if (d < 0.9) emit("this");
      else if (d < 0.95) emit("every");
      else emit(cast_pronoun_possessive());
    }
    if (!adj.empty()) emit(adj);
    emit(pl ? plural(n) : n);
    if (allow_pp && chance(0.18)) {
      emit("of");
      noun_phrase(false);
    }
    return pl;
  }

  std::string cast_pronoun_possessive() {
    const Person& p = cast_[rng_.below(cast_.size())];
    return p.female ? "her" : "his";
  }

  /// Subject; returns true when plural.
  bool subject() {
    const double d = rng_.uniform();
    if (d < 0.32) {
      const Person& p = cast_[rng_.below(cast_.size())];
      emit(p.name);
      last_ = &p;
      return false;
    }
    if (d < 0.52 && last_) {
      emit(last_->female ? "she" : "he");
      return false;
    }
    if (d < 0.6) {
      emit(chance(0.5) ? "they" : "we");
      return true;
    }
    return noun_phrase();
  }

  void place_phrase() {
    const double d = rng_.uniform();
    emit(lex_.prepositions.pick(rng_));
    if (d < 0.3) {
      emit(topic().places.pick(rng_));
    } else if (d < 0.38) {
      emit(town_);
    } else {
      noun_phrase(false);
    }
  }

  void verb_phrase(bool plural_subject) {
    const double d = rng_.uniform();
    if (d < 0.5) {
      emit(transitive().past);
      if (chance(0.2)) {
        emit(cast_[rng_.below(cast_.size())].name);
      } else {
        noun_phrase();
      }
      if (chance(0.45)) place_phrase();
    } else if (d < 0.66) {
      emit(chance(0.6) ? topic().intransitive.pick(rng_) : lex_.common_intransitive.pick(rng_));
      if (chance(0.35)) emit(lex_.adverbs.pick(rng_));
      if (chance(0.5)) place_phrase();
    } else if (d < 0.76) {
      emit(plural_subject ? "were" : "was");
      if (chance(0.2)) emit(chance(0.5) ? "very" : "not");
      emit(adjective());
      if (chance(0.3)) place_phrase();
    } else if (d < 0.86) {
      emit(lex_.modals.pick(rng_));
      if (chance(0.15)) emit("not");
      emit(transitive().base);
      noun_phrase();
    } else if (d < 0.93) {
      emit(chance(0.5) ? "began" : "tried");
      emit("to");
      emit(transitive().base);
      noun_phrase();
      if (chance(0.3)) place_phrase();
    } else {
      emit(parse_verb(lex_.reporting.pick(rng_)).past);
      emit("that");
      clause();
    }
  }

  void clause() {
    const bool pl = subject();
    if (chance(0.1)) emit(lex_.adverbs.pick(rng_));
    verb_phrase(pl);
  }

  void sentence() {
    const double d = rng_.uniform();
    if (d < 0.25) {
      clause();
    } else if (d < 0.47) {
      clause();
      emit(",");
      emit(lex_.coordinators.pick(rng_));
      clause();
    } else if (d < 0.62) {
      emit(lex_.times.pick(rng_));
      emit(",");
      clause();
    } else if (d < 0.78) {
      clause();
      emit(lex_.subordinators.pick(rng_));
      clause();
    } else if (d < 0.86) {
      place_phrase();
      emit(",");
      clause();
      if (chance(0.5)) {
        emit(",");
        emit("and");
        clause();
      }
    } else if (d < 0.93) {
      clause();
      emit(",");
      emit(lex_.coordinators.pick(rng_));
      clause();
      emit(lex_.subordinators.pick(rng_));
      clause();
    } else {
      emit(chance(0.5) ? "why" : "how");
      emit("could");
      if (chance(0.5)) {
        emit(cast_[rng_.below(cast_.size())].name);
      } else {
        noun_phrase(false);
      }
      emit(transitive().base);
      noun_phrase();
      emit("?");
      return;
    }
    emit(".");
  }

  const Lexicon& lex_;
  Rng& rng_;
  std::size_t topic_ = 0;
  std::size_t secondary_ = 0;
  std::vector<Person> cast_;
  const Person* last_ = nullptr;
  std::string town_;
  std::vector<std::size_t> fav_nouns_;
  std::vector<std::size_t> fav_verbs_;
  std::vector<std::size_t> fav_adjs_;
  std::string out_;
  std::size_t words_ = 0;
};

}  // namespace detail

/// Generates `config.documents` paragraphs. Document i depends only on
/// (seed, i), so any prefix of a larger run is reproduced exactly.
inline std::vector<std::string> generate_documents(const ProseConfig& config) {
  std::vector<std::string> docs;
  docs.reserve(config.documents);
  const auto& lex = detail::lexicon();
  for (std::size_t i = 0; i < config.documents; ++i) {
    Rng rng(derive_seed(config.seed, {i}));
    detail::DocumentWriter writer(lex, rng);
    docs.push_back(writer.write(config.min_words, config.max_words));
  }
  return docs;
}

}  // namespace fastcurv::prose
