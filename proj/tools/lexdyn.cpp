// lexdyn: corpus analytics for word growth and decline.
//
// Stage-on-disk pipeline: every subcommand reads the previous stage's
// artifacts from the workdir and writes its own CSV/TSV outputs plus a run
// manifest, so long runs are restartable and auditable.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "lexdyn/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"lexdyn: social and linguistic dissemination analytics for word growth"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value config file; flags override file values");

    lexdyn::pipeline::CommandOptions options;
    std::string input, output, bots, excluded_subreddits, allowlist, denylist, pos_file;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--workdir", options.workdir, "Artifact directory")->required();
        cmd->add_flag("--force", options.force, "Re-run even when manifests are up to date");
        return cmd;
    };
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Random seed (mandatory)")
            ->required()
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* synth = add_common(app.add_subcommand("synth", "Generate a synthetic corpus"));
    synth->add_option("--input", input, "Synth config file (key=value)")->required();
    synth->add_option("--output", output, "Corpus output path (default workdir/corpus.ndjson)");

    auto* ingest_cmd = add_common(
        app.add_subcommand("ingest", "Parse, filter, and normalize a comment corpus"));
    ingest_cmd->add_option("--input", input, "Newline-delimited JSON comment dump")->required();
    ingest_cmd->add_option("--bots", bots, "Bot/spam author list (one id per line)");
    ingest_cmd->add_option("--exclude-subreddits", excluded_subreddits,
                           "Excluded subreddit list (one id per line)");
    ingest_cmd->add_option("--window-start", options.window_start, "First month, YYYY-MM");
    ingest_cmd->add_option("--months", options.months, "Window length T in months");
    ingest_cmd->add_option("--vocab-size", options.vocab_size, "Vocabulary size K");
    ingest_cmd->add_option("--shards", options.shards, "Parallel shards for counting passes");

    auto* count = add_common(
        app.add_subcommand("count", "Build frequency, context, and social usage tables"));
    count->add_option("--months", options.months, "Window length T in months");
    count->add_option("--shards", options.shards, "Parallel shards (merge-deterministic)");

    auto* disseminate = add_common(
        app.add_subcommand("disseminate", "Compute social and linguistic dissemination"));
    disseminate->add_option("--heaps-min-count", options.heaps_min_count,
                            "Minimum monthly count for the Heaps fit population");

    auto* detect = add_common(
        app.add_subcommand("detect", "Detect growth and decline words; apply annotations"));
    detect->add_option("--spearman-pct", options.spearman_pct, "Growth screen percentile");
    detect->add_option("--piecewise-pct", options.piecewise_pct, "Piecewise R2 percentile");
    detect->add_option("--logistic-pct", options.logistic_pct, "Logistic R2 percentile");
    detect->add_option("--allowlist", allowlist, "Annotated nonstandard words (one per line)");
    detect->add_option("--denylist", denylist, "Annotated proper/standard words (one per line)");

    auto* correlation = add_common(app.add_subcommand(
        "analyze-correlation", "Relative importance of predictors for frequency change"));
    correlation->add_option("--lags", options.lags, "Lag values k (months)")->delimiter(',');
    correlation->add_option("--bootstrap-iters", options.importance_bootstrap,
                            "Bootstrap iterations for importance bands");
    add_seed(correlation);

    auto* causal = add_common(
        app.add_subcommand("analyze-causal", "Average dose response per dissemination metric"));
    causal->add_option("--quantiles", options.adrf_quantiles, "Treatment quantile bins");
    causal->add_option("--bootstrap-iters", options.adrf_bootstrap, "Bootstrap draws");
    causal->add_option("--k", options.causal_k, "Early-window length for treatment means");
    add_seed(causal);

    auto* predict = add_common(
        app.add_subcommand("analyze-predict", "Binary growth prediction and POS checks"));
    predict->add_option("--k-max", options.predict_k_max, "Largest early window k");
    predict->add_option("--folds", options.folds, "Cross-validation folds");
    predict->add_option("--pos", pos_file, "word<TAB>tag file for POS robustness checks");
    add_seed(predict);

    auto* surv = add_common(
        app.add_subcommand("analyze-survival", "Cox analysis of time to decline"));
    surv->add_option("--k", options.survival_k, "Early-window length for covariate means");
    surv->add_option("--folds", options.folds, "Cross-validation folds");
    add_seed(surv);

    auto* report = add_common(
        app.add_subcommand("report", "Aggregate analyses into report.json and plot CSVs"));
    report->add_option("--lags", options.lags, "Lag values used by analyze-correlation")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the parse diagnostic
        return lexdyn::pipeline::kExitConfig;
    }

    if (!input.empty()) options.input = input;
    if (!output.empty()) options.output = output;
    if (!bots.empty()) options.bots_path = bots;
    if (!excluded_subreddits.empty()) options.excluded_subreddits_path = excluded_subreddits;
    if (!allowlist.empty()) options.allowlist_path = allowlist;
    if (!denylist.empty()) options.denylist_path = denylist;
    if (!pos_file.empty()) options.pos_path = pos_file;
    if (seed_set) options.seed = seed;

    const std::string command = app.get_subcommands().front()->get_name();
    return lexdyn::pipeline::run_cli(command, options);
}
