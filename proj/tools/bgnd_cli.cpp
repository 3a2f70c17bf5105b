// bgnd command-line tool: simulate, train, baseline, predict, evaluate.
//
// Exit codes: 0 ok, 2 input error, 3 numerical failure, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "bgnd/bgnd.hpp"
#include "bgnd/sim_config.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void note(const std::string& msg) { std::cerr << "bgnd: " << msg << '\n'; }

/// Echoes every option of the subcommand, defaults included.
void write_manifest(const CLI::App& sub, const fs::path& dir, const std::string& resolved = "") {
    if (!dir.empty()) fs::create_directories(dir);
    const auto path = dir / "run_manifest.toml";
    std::ofstream out(path);
    if (!out) throw bgnd::InputError("cannot write '" + path.string() + "'");
    out << "# bgnd " << sub.get_name() << " run manifest\n" << sub.config_to_str(true, true);
    if (!resolved.empty()) out << "\n# resolved settings\n" << resolved;
    note("manifest written to " + path.string());
}

fs::path dir_of(const std::string& file) { return fs::path(file).parent_path(); }

void make_parent(const std::string& file) {
    if (const auto d = dir_of(file); !d.empty()) fs::create_directories(d);
}

void report_drops(const bgnd::IngestResult& r, const std::string& path) {
    if (r.dropped == 0) return;
    std::string lines;
    for (std::size_t k = 0; k < r.dropped_lines.size() && k < 10; ++k) lines += " " + std::to_string(r.dropped_lines[k]);
    if (r.dropped_lines.size() > 10) lines += " ...";
    note(path + ": dropped " + std::to_string(r.dropped) + " row(s) with missing or invalid values (lines" + lines + ")");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config, out, truth;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
};

std::string run_simulate(const SimulateArgs& a) {
    auto cfg = bgnd::load_sim_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.n) cfg.n = *a.n;
    bgnd::validate(cfg);
    const auto r = bgnd::simulate(cfg);
    bgnd::write_sim_data(r, cfg, a.out);
    bgnd::write_sim_truth(r, cfg, a.truth);
    note("simulated " + std::to_string(cfg.n) + " rows into " + a.out + ", " + std::to_string(r.truth.size()) +
         " truth cells into " + a.truth);
    if (r.redraws) note(std::to_string(r.redraws) + " noise draws fell below zero on the transformed scale and were redrawn");
    return bgnd::sim_config_to_toml(cfg);
}

// ---------------------------------------------------------------------------
// train / baseline
// ---------------------------------------------------------------------------

struct DataArgs {
    std::string data, response;
    std::vector<std::string> categorical, ignore;
};

bgnd::IngestResult load_training(const DataArgs& a, bgnd::FeatureSchema& schema) {
    auto r = bgnd::load_csv(a.data, {a.response, a.categorical, a.ignore}, &schema);
    report_drops(r, a.data);
    note(a.data + ": " + std::to_string(r.data.rows) + " rows, " + std::to_string(r.data.cols()) + " features");
    return r;
}

struct TrainArgs {
    DataArgs data;
    double gamma = 2.0;
    double power = 0.25;
    std::string out;
    std::uint64_t seed = 0;
    bool no_crossfit = false;
    std::optional<double> nu, psi;
    std::size_t max_iters = 1000;
    std::optional<std::size_t> depth;
    std::size_t cv_folds = 10;
    double epsilon = 0.5;
    std::size_t max_depth = 0;
    std::size_t max_bins = bgnd::kDefaultMaxBins;
};

void run_train(const TrainArgs& a) {
    bgnd::FeatureSchema schema;
    const auto ing = load_training(a.data, schema);
    bgnd::FitConfig cfg;
    cfg.seed = a.seed;
    cfg.crossfit = !a.no_crossfit;
    cfg.max_bins = a.max_bins;
    cfg.scale.nu = a.nu;
    cfg.scale.psi = a.psi;
    cfg.scale.epsilon = a.epsilon;
    cfg.scale.max_depth = a.max_depth;
    cfg.location.max_iters = cfg.scale.max_iters = a.max_iters;
    cfg.location.cv_folds = cfg.scale.cv_folds = a.cv_folds;
    if (a.depth) {
        cfg.location.depth = cfg.scale.depth = *a.depth;
        cfg.location.depth_grid = cfg.scale.depth_grid = {*a.depth};
    }
    auto m = bgnd::fit(ing.data, a.gamma, bgnd::PowerTransform(a.power), cfg);
    m.schema = schema;
    m.metadata["data"] = a.data.data;
    m.metadata["dropped_rows"] = ing.dropped;
    bgnd::save_model(m, a.out);
    for (std::size_t k = 0; k < m.directions.size(); ++k) {
        const auto& d = m.directions[k];
        note("direction " + std::to_string(k + 1) + ": location " + std::to_string(d.location.stages.size()) +
             " trees (depth " + std::to_string(d.location_report.chosen_depth) + ", " + d.location_report.stop_reason +
             "), log-scale " + std::to_string(d.log_scale.stages.size()) + " trees (depth " +
             std::to_string(d.scale_report.chosen_depth) + ", " + d.scale_report.stop_reason + ", nu " +
             bgnd::format_double(d.scale_report.nu) + ", psi " + bgnd::format_double(d.scale_report.psi) + ")");
    }
    note("model written to " + a.out);
}

struct BaselineArgs {
    DataArgs data;
    std::string kind, out;
};

void run_baseline(const BaselineArgs& a) {
    bgnd::FeatureSchema schema;
    const auto ing = load_training(a.data, schema);
    bgnd::Json j;
    if (a.kind == "exp") {
        auto m = bgnd::fit_exp_glm(ing.data);
        m.schema = schema;
        j = bgnd::model_to_json(m);
        note("exponential GLM converged in " + std::to_string(m.iterations) + " Newton steps");
    } else if (a.kind == "lognormal") {
        auto m = bgnd::fit_lognormal_mle(ing.data);
        m.schema = schema;
        j = bgnd::model_to_json(m);
        note("log-normal scale fit converged in " + std::to_string(m.iterations) + " Newton steps");
    } else {
        auto m = bgnd::fit_historical_average(ing.data);
        m.schema = schema;
        j = bgnd::model_to_json(m);
        std::size_t empty = 0;
        for (std::size_t b = 0; b < bgnd::kWeekBins; ++b) empty += m.is_fallback(b);
        if (empty) note(std::to_string(empty) + " empty week bin(s) use the global mean");
    }
    bgnd::write_json_file(j, a.out);
    note(a.kind + " baseline written to " + a.out);
}

// ---------------------------------------------------------------------------
// predict / evaluate
// ---------------------------------------------------------------------------

struct LoadedModel {
    std::string path, kind;
    std::variant<bgnd::BgndModel, bgnd::LinearExpModel, bgnd::LinearLogNormalModel, bgnd::HistoricalAverage> model;
    bgnd::FeatureSchema schema;
    std::vector<std::string> feature_names;
};

LoadedModel load_any_model(const std::string& path) {
    const auto j = bgnd::read_model_envelope(path);
    LoadedModel lm;
    lm.path = path;
    lm.kind = j["kind"].get<std::string>();
    if (lm.kind == "bgnd") {
        auto m = bgnd::model_from_json(j, path);
        lm.schema = m.schema;
        lm.feature_names = m.feature_names;
        lm.model = std::move(m);
    } else if (lm.kind == "exp_glm") {
        auto m = bgnd::exp_glm_from_json(j, path);
        lm.schema = m.schema;
        lm.feature_names = m.design.feature_names;
        lm.model = std::move(m);
    } else if (lm.kind == "lognormal") {
        auto m = bgnd::lognormal_from_json(j, path);
        lm.schema = m.schema;
        lm.feature_names = m.design.feature_names;
        lm.model = std::move(m);
    } else if (lm.kind == "histavg") {
        auto m = bgnd::histavg_from_json(j, path);
        lm.schema = m.schema;
        lm.feature_names = m.feature_names;
        lm.model = std::move(m);
    } else {
        throw bgnd::InputError(path + ": unknown model kind '" + lm.kind + "'");
    }
    // models fitted from bare matrices carry names only: read them as numeric columns
    if (lm.schema.columns.empty())
        for (const auto& f : lm.feature_names) lm.schema.columns.push_back({f, bgnd::ColumnKind::numeric, {}});
    return lm;
}

bgnd::Forecast forecast_row(const LoadedModel& lm, const bgnd::Dataset& d, std::size_t i) {
    return std::visit(
        [&](const auto& m) -> bgnd::Forecast {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, bgnd::HistoricalAverage>) {
                if (!d.has_timestamps()) throw bgnd::InputError(lm.path + ": historical average needs a timestamp column");
                return bgnd::forecast_of(m, d.week_hours[i]);
            } else {
                return bgnd::forecast_of(m, d.row(i));
            }
        },
        lm.model);
}

bgnd::IngestResult encode_for(const LoadedModel& lm, const bgnd::CsvTable& t, bool need_response) {
    return bgnd::encode_table(t, lm.schema, need_response);
}

struct PredictArgs {
    std::string model, data, out;
    std::vector<double> quantiles{0.5, 0.7, 0.9};
};

void run_predict(const PredictArgs& a) {
    for (double q : a.quantiles)
        if (!(q > 0.0 && q < 1.0)) throw bgnd::InputError("quantiles must lie in (0,1)");
    const auto lm = load_any_model(a.model);
    const auto t = bgnd::read_csv(a.data);
    const auto ing = encode_for(lm, t, false);
    report_drops(ing, a.data);
    const auto& d = ing.data;

    std::vector<std::string> head{"line"};
    if (lm.kind == "bgnd") head.insert(head.end(), {"mu", "b"});
    else if (lm.kind == "exp_glm") head.push_back("rate");
    else if (lm.kind == "lognormal") head.insert(head.end(), {"mu_ln", "sigma_ln"});
    else head.push_back("point");
    for (double q : a.quantiles) head.push_back("q" + bgnd::format_double(q));
    bgnd::CsvWriter w(a.out);
    w.row(head);
    bgnd::ClipCounter clips;
    for (std::size_t i = 0; i < d.rows; ++i) {
        const auto f = forecast_row(lm, d, i);
        std::vector<std::string> row{std::to_string(ing.kept_lines[i])};
        switch (f.kind) {
            case bgnd::Forecast::Kind::gnd:
                row.push_back(bgnd::format_double(f.params.mu));
                row.push_back(bgnd::format_double(f.params.b));
                break;
            case bgnd::Forecast::Kind::exponential: row.push_back(bgnd::format_double(f.rate)); break;
            case bgnd::Forecast::Kind::point: row.push_back(bgnd::format_double(f.value)); break;
        }
        for (double q : a.quantiles) {
            const double v = f.kind == bgnd::Forecast::Kind::gnd
                                 ? bgnd::pushforward_quantile(f.transform, f.params, q, &clips)
                                 : f.quantile(q);
            row.push_back(bgnd::format_double(v));
        }
        w.row(row);
    }
    if (clips.count) note(std::to_string(clips.count) + " quantile(s) fell below zero on the transformed scale and were clipped to 0");
    note(std::to_string(d.rows) + " prediction rows written to " + a.out);
}

struct EvaluateArgs {
    std::vector<std::string> models, names;
    std::string data, out, response, benchmark;
    std::vector<double> alphas{0.6, 0.65, 0.7, 0.75, 0.8};
    double cutoff = 10.0;
    std::vector<double> fracs{0.05, 0.10, 0.15, 0.20, 0.25};
};

void run_evaluate(const EvaluateArgs& a) {
    if (!a.names.empty() && a.names.size() != a.models.size())
        throw bgnd::InputError("--names needs one name per model");
    std::vector<LoadedModel> lms;
    for (const auto& p : a.models) lms.push_back(load_any_model(p));
    std::string response = a.response;
    if (response.empty())
        for (const auto& lm : lms)
            if (!lm.schema.response.empty()) {
                response = lm.schema.response;
                break;
            }
    if (response.empty()) throw bgnd::InputError("no response column recorded in the models; pass --response");

    const auto t = bgnd::read_csv(a.data);
    const auto resp_col = t.column(response);
    if (!resp_col) throw bgnd::InputError(a.data + ": response column '" + response + "' not found");

    // score only rows every model can encode and that carry a response
    std::vector<bgnd::IngestResult> encoded;
    std::map<std::size_t, std::size_t> line_to_row;
    for (std::size_t i = 0; i < t.rows.size(); ++i) line_to_row[t.line_of_row[i]] = i;
    std::set<std::size_t> common;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (bgnd::parse_number(t.rows[i][*resp_col])) common.insert(t.line_of_row[i]);
    for (const auto& lm : lms) {
        auto s = lm.schema;
        s.response.clear();
        encoded.push_back(bgnd::encode_table(t, s, false));
        const std::set<std::size_t> kept(encoded.back().kept_lines.begin(), encoded.back().kept_lines.end());
        std::set<std::size_t> both;
        for (auto l : common)
            if (kept.count(l)) both.insert(l);
        common.swap(both);
    }
    if (common.empty()) throw bgnd::InputError("no rows usable by every model");
    if (common.size() < t.rows.size()) note("scoring " + std::to_string(common.size()) + " of " + std::to_string(t.rows.size()) + " rows");

    std::vector<double> y;
    for (auto l : common) y.push_back(*bgnd::parse_number(t.rows[line_to_row[l]][*resp_col]));
    std::vector<std::vector<bgnd::Forecast>> forecasts(lms.size());
    std::vector<std::string> names;
    for (std::size_t k = 0; k < lms.size(); ++k) {
        std::map<std::size_t, std::size_t> row_of_line;
        for (std::size_t i = 0; i < encoded[k].kept_lines.size(); ++i) row_of_line[encoded[k].kept_lines[i]] = i;
        for (auto l : common) forecasts[k].push_back(forecast_row(lms[k], encoded[k].data, row_of_line[l]));
        names.push_back(a.names.empty() ? fs::path(lms[k].path).stem().string() : a.names[k]);
    }
    std::size_t bench = 0;
    if (!a.benchmark.empty()) {
        const auto it = std::find(names.begin(), names.end(), a.benchmark);
        if (it == names.end()) throw bgnd::InputError("benchmark '" + a.benchmark + "' is not among the model names");
        bench = static_cast<std::size_t>(it - names.begin());
    }
    const auto rep = bgnd::evaluate(names, forecasts, y, a.alphas, a.fracs, a.cutoff, bench);
    bgnd::write_report(rep, a.out);
    for (const auto& s : rep.models)
        note(s.name + ": mean CRPS " + bgnd::format_double(bgnd::round_sig(s.crps, 4)) + ", reduction vs " + rep.benchmark + " " +
             bgnd::format_double(bgnd::round_sig(s.crps_reduction_pct)) + "%");
    note("report written to " + a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bgnd: boosted generalized normal distributional regression"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate synthetic data with known cell-wise parameters");
    s->add_option("--config", sim.config, "Simulation TOML file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", sim.out, "Output data CSV")->required();
    s->add_option("--truth", sim.truth, "Output truth CSV (mu*, b* per cell)")->required();
    s->add_option("--seed", sim.seed, "Override the config's seed");
    s->add_option("--n", sim.n, "Override the config's row count")->check(CLI::PositiveNumber);

    const auto add_data = [](CLI::App* sub, DataArgs& d) {
        sub->add_option("--data", d.data, "Training CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--response", d.response, "Response column")->required();
        sub->add_option("--categorical", d.categorical, "Columns to one-hot encode regardless of content")->delimiter(',');
        sub->add_option("--ignore", d.ignore, "Columns to leave out")->delimiter(',');
    };

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Fit a bGND model");
    add_data(t, tr.data);
    t->add_option("--gamma", tr.gamma, "GND shape (>= 1)")->required()->check(CLI::Range(1.0, 100.0));
    t->add_option("--power", tr.power, "Response transform: 0 log, 0.25 fourth root, 1 identity")->required()->check(CLI::NonNegativeNumber);
    t->add_option("--out", tr.out, "Output model JSON")->required();
    t->add_option("--seed", tr.seed, "Seed for the sample split and CV folds");
    t->add_flag("--no-crossfit", tr.no_crossfit, "Fit one direction only");
    t->add_option("--nu", tr.nu, "Scale step shrinkage in (0,1) [default: sample-size schedule]");
    t->add_option("--psi", tr.psi, "Sup-norm cap on the log-scale [default: Lambert-W schedule]");
    t->add_option("--max-iters", tr.max_iters, "Boosting iterations per stage")->check(CLI::PositiveNumber);
    t->add_option("--depth", tr.depth, "Fix the tree depth instead of choosing it by CV")->check(CLI::PositiveNumber);
    t->add_option("--cv-folds", tr.cv_folds, "CV folds for depth and iteration count (< 2 disables)");
    t->add_option("--epsilon", tr.epsilon, "Minimum correlation of a scale tree with the gradient")->check(CLI::Range(0.0, 1.0));
    t->add_option("--max-depth", tr.max_depth, "Deepest scale tree the epsilon search may grow; 0 = full grid depth");
    t->add_option("--max-bins", tr.max_bins, "Split candidates per feature")->check(CLI::Range(2, 65535));

    BaselineArgs bl;
    auto* b = app.add_subcommand("baseline", "Fit a classical comparator");
    b->add_option("--kind", bl.kind, "exp | lognormal | histavg")->required()->check(CLI::IsMember({"exp", "lognormal", "histavg"}));
    add_data(b, bl.data);
    b->add_option("--out", bl.out, "Output model JSON")->required();

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Write per-row parameters and quantiles");
    p->add_option("--model", pr.model, "Model JSON (any kind)")->required()->check(CLI::ExistingFile);
    p->add_option("--data", pr.data, "Feature CSV")->required()->check(CLI::ExistingFile);
    p->add_option("--quantiles", pr.quantiles, "Quantile levels")->delimiter(',');
    p->add_option("--out", pr.out, "Output CSV")->required();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score models on held-out data");
    e->add_option("--models", ev.models, "Model JSON files")->required()->delimiter(',')->check(CLI::ExistingFile);
    e->add_option("--names", ev.names, "Display names, one per model [default: file stems]")->delimiter(',');
    e->add_option("--data", ev.data, "Test CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--response", ev.response, "Response column [default: from the model files]");
    e->add_option("--benchmark", ev.benchmark, "Model name for CRPS reductions [default: first model]");
    e->add_option("--alphas", ev.alphas, "Pinball-loss levels")->delimiter(',');
    e->add_option("--long-wait-cutoff-min", ev.cutoff, "Long-wait cutoff in response units");
    e->add_option("--threshold-fracs", ev.fracs, "Flagged fractions for the long-wait analysis")->delimiter(',');
    e->add_option("--out", ev.out, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitInput;
    }

    try {
        for (const auto* f : {&sim.out, &sim.truth, &tr.out, &bl.out, &pr.out})
            if (!f->empty()) make_parent(*f);
        if (*s) {
            const auto resolved = run_simulate(sim);
            write_manifest(*s, dir_of(sim.out), resolved);
        } else if (*t) {
            run_train(tr);
            write_manifest(*t, dir_of(tr.out));
        } else if (*b) {
            run_baseline(bl);
            write_manifest(*b, dir_of(bl.out));
        } else if (*p) {
            run_predict(pr);
            write_manifest(*p, dir_of(pr.out));
        } else if (*e) {
            run_evaluate(ev);
            write_manifest(*e, fs::path(ev.out));
        }
    } catch (const bgnd::InputError& ex) {
        note(std::string("input error: ") + ex.what());
        return kExitInput;
    } catch (const std::invalid_argument& ex) {
        note(std::string("input error: ") + ex.what());
        return kExitInput;
    } catch (const fs::filesystem_error& ex) {
        note(std::string("input error: ") + ex.what());
        return kExitInput;
    } catch (const std::domain_error& ex) {
        note(std::string("input error: ") + ex.what());
        return kExitInput;
    } catch (const bgnd::NumericalError& ex) {
        note(std::string("numerical failure: ") + ex.what());
        return kExitNumerical;
    } catch (const bgnd::ContractError& ex) {
        note(std::string("numerical failure: ") + ex.what());
        return kExitNumerical;
    } catch (const std::exception& ex) {
        note(std::string("error: ") + ex.what());
        return 1;
    }
    return 0;
}
