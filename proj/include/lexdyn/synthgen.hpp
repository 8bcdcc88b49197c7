#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lexdyn/wordsets.hpp"

namespace lexdyn::synthgen {

struct InjectedWordSpec {
    std::string word;
    enum class Trajectory { growth, decline } trajectory = Trajectory::growth;
    double center = 18.0;     // mu, month units
    double scale = 4.0;       // s > 0
    double amplitude = 2e-4;  // frequency mass above the floor; peak = floor + amplitude
    double floor = 3e-5;      // base frequency keeping every month countable
    enum class ContextRegime { open, template_bound } context = ContextRegime::open;
    int template_frames = 3;  // kappa fixed two-word frames
    double user_fraction = 1.0, subreddit_fraction = 1.0, thread_fraction = 1.0;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    int months = 36;
    int users = 200;
    int subreddits = 10;
    int threads_per_subreddit_month = 5;
    int tokens_per_month = 60000;
    int background_vocab = 2000;
    double zipf_exponent = 1.05;
    double comment_mean_tokens = 12.0;
    double sentence_mean_tokens = 8.0;
    std::string window_start = "2013-06";
    std::vector<InjectedWordSpec> injected;
};

void validate(const SynthConfig& cfg);

// Target relative frequency of an injected word at 1-based month t: a rising
// logistic CDF for growth words, a scaled logistic density for decline words,
// both on top of the floor.
double target_frequency(const InjectedWordSpec& spec, int month);

// Collision-free lowercase background word for a Zipf rank; stable under the
// ingest normalizer (no character runs beyond two).
std::string background_word(int rank);

// Seeded, reproducible comment stream in the ingest input format.
void generate_corpus(const SynthConfig& cfg, const std::string& corpus_path);

std::vector<wordsets::WordLabel> oracle_labels(const SynthConfig& cfg);
void write_word_list(const SynthConfig& cfg, const std::string& path);

SynthConfig read_synth_config(const std::string& path);
void write_synth_config(const SynthConfig& cfg, const std::string& path);

}  // namespace lexdyn::synthgen
