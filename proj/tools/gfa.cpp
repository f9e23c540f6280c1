// gfa: command-line front end for graph filter analysis.
//
// Exit codes: 0 success, 1 violation or runtime error, 2 usage error.

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "gfa/io.hpp"
#include "gfa/report.hpp"
#include "gfa/synth.hpp"
#include "gfa/validator.hpp"

namespace fs = std::filesystem;
using namespace gfa;

namespace {

std::string sha256_file(const std::string& path) {
  std::string bytes = io::read_bytes(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InvalidInput("cannot write '" + out + "'");
  f << j.dump(2) << '\n';
}

struct GraphArgs {
  std::string graph, labels;
  std::optional<int> reduce;

  void attach(CLI::App* app) {
    app->add_option("--graph", graph, "edge list (u v per line)")->required()->check(CLI::ExistingFile);
    app->add_option("--labels", labels, "labels CSV (node,label)")->required()->check(CLI::ExistingFile);
    app->add_option("--reduce", reduce, "one-vs-rest relabeling: class c -> 0, rest -> 1");
  }

  LabeledGraph load(std::vector<std::string>* notices = nullptr) const {
    LabeledGraph g = io::read_graph(graph, labels);
    if (reduce) {
      g = reduce_to_binary(g, *reduce);
      if (notices) notices->push_back("labels reduced one-vs-rest on class " + std::to_string(*reduce));
    }
    return g;
  }

  std::map<std::string, std::string> hashes() const {
    return {{"graph", sha256_file(graph)}, {"labels", sha256_file(labels)}};
  }
};

// Binary bound inputs: two columns of a features CSV, or the label
// indicators themselves when no features are given.
std::pair<Vector, Vector> bound_inputs(const LabeledGraph& g, const std::string& features) {
  if (features.empty()) {
    Matrix y = label_matrix(g).Y;
    return {y.col(0), y.col(1)};
  }
  Matrix x = io::read_features(features, g.n());
  if (x.cols() != 2) throw InvalidInput("bound inputs need exactly two feature columns (x0, x1)");
  return {x.col(0), x.col(1)};
}

json bound_verdict(const BoundReport& b) {
  json v = {{"filter", b.filter}, {"relaxed_chain", b.er > b.chain.relaxed}};
  if (b.spectral_bound) v["spectral_bound_holds"] = b.er >= *b.spectral_bound;
  return v;
}

bool verdict_ok(const json& v) {
  for (const auto& [k, val] : v.items())
    if (val.is_boolean() && !val.get<bool>()) return false;
  return true;
}

void write_plot_data(const std::string& dir, const IndicatorReport& rep) {
  fs::create_directories(dir);
  for (const auto& ld : rep.label_frequency) {
    std::vector<std::vector<double>> rows;
    for (const auto& [l, p] : ld.distribution) rows.push_back({l, p});
    io::write_csv((fs::path(dir) / ("label_diff_" + std::to_string(ld.a) + "_" + std::to_string(ld.b) + ".csv")).string(),
                  {"eigenvalue", "probability"}, rows);
  }
  auto matrix_csv = [&](const std::string& name, const Matrix& m) {
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < m.cols(); ++j) header.push_back("class_" + std::to_string(j));
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(m(i, j));
    io::write_csv((fs::path(dir) / name).string(), header, rows);
  };
  if (!rep.interaction.empty()) {
    matrix_csv("interaction.csv", rep.interaction.front().pi);
    matrix_csv("interaction_symmetric.csv", rep.interaction.front().pi_tilde);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral label-interaction analysis, filter bounds and DEMUF training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::map<CLI::App*, std::string> config_paths;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_paths[sub], "key = value file; keys are long option names")
        ->check(CLI::ExistingFile);
    return sub;
  };

  // analyze
  auto* analyze = with_config(app.add_subcommand("analyze", "indicator report, optional per-filter bounds"));
  GraphArgs an_graph;
  an_graph.attach(analyze);
  std::vector<std::string> an_filters;
  std::string an_features, an_plot, an_out;
  int an_max_k = 2;
  analyze->add_option("--filter", an_filters, "filter spec (poly:c0,c1,.. geps:e gcn gcn-norm gin:e cheb:k); repeatable");
  analyze->add_option("--features", an_features, "two-column CSV used as bound inputs");
  analyze->add_option("--max-k", an_max_k, "largest interaction order")->check(CLI::Range(1, 16));
  analyze->add_option("--plot-data", an_plot, "directory for CSV plot data");
  analyze->add_option("--out", an_out, "report path (default stdout)");

  // bounds
  auto* bounds = with_config(app.add_subcommand("bounds", "error bounds for binary labels"));
  GraphArgs bd_graph;
  bd_graph.attach(bounds);
  std::vector<std::string> bd_filters;
  std::string bd_features, bd_out;
  bounds->add_option("--filter", bd_filters, "filter spec; repeatable")->required();
  bounds->add_option("--features", bd_features, "two-column CSV used as inputs (default: label indicators)");
  bounds->add_option("--out", bd_out, "report path (default stdout)");

  // validate
  auto* validate = with_config(app.add_subcommand("validate", "randomized checks of the analytical results"));
  TrialConfig vcfg;
  std::string v_suite = "all", v_out;
  validate->add_option("--suite", v_suite, "suite")->check(CLI::IsMember(suite_names()));
  validate->add_option("--trials", vcfg.trials, "evaluated trials per suite")->check(CLI::PositiveNumber);
  validate->add_option("--seed", vcfg.seed, "seed");
  validate->add_option("--n-min", vcfg.n_min, "smallest graph")->check(CLI::Range(4, 4096));
  validate->add_option("--n-max", vcfg.n_max, "largest graph")->check(CLI::Range(4, 4096));
  validate->add_option("--out", v_out, "report path (default stdout)");

  // train
  auto* train = with_config(app.add_subcommand("train", "train a DEMUF model or baseline"));
  demuf::ModelConfig mcfg;
  std::string t_model = "p-demuf", t_graph, t_labels, t_features, t_out;
  std::vector<int> t_depth;
  bool t_no_mask = false;
  train->add_option("--model", t_model, "p-demuf | t-demuf | mlp | fixed-low")
      ->check(CLI::IsMember({"p-demuf", "t-demuf", "mlp", "fixed-low"}));
  train->add_option("--graph", t_graph, "edge list")->required()->check(CLI::ExistingFile);
  train->add_option("--labels", t_labels, "labels CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--features", t_features, "features CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--filters", mcfg.filters, "number of filters N")->check(CLI::PositiveNumber);
  train->add_option("--depth", t_depth, "filter depth h (one value, or one per filter, comma-separated)")->delimiter(',');
  train->add_option("--epochs", mcfg.epochs, "epochs")->check(CLI::PositiveNumber);
  train->add_option("--seed", mcfg.seed, "seed");
  train->add_option("--hidden", mcfg.hidden, "hidden width")->check(CLI::PositiveNumber);
  train->add_option("--mlp-layers", mcfg.mlp_layers, "final MLP layers, output included")->check(CLI::PositiveNumber);
  train->add_option("--lr", mcfg.learning_rate, "Adam learning rate");
  train->add_option("--weight-decay", mcfg.weight_decay, "L2 penalty on weights");
  train->add_option("--dropout", mcfg.dropout, "dropout inside MLPs");
  train->add_option("--beta", mcfg.constraint_weight, "T-DEMUF constraint weight");
  train->add_option("--tau-start", mcfg.tau_start, "initial mask temperature");
  train->add_option("--tau-end", mcfg.tau_end, "final mask temperature");
  train->add_flag("--no-mask", t_no_mask, "freeze masks to all-ones");
  train->add_option("--out", t_out, "metrics path (default stdout)");

  // synth sbm
  auto* synth = app.add_subcommand("synth", "synthetic data");
  synth->require_subcommand(1);
  auto* sbm = with_config(synth->add_subcommand("sbm", "stochastic block model"));
  SbmSpec spec;
  std::string s_prefix;
  sbm->add_option("--n", spec.n, "nodes")->check(CLI::PositiveNumber);
  sbm->add_option("--classes", spec.classes, "classes")->check(CLI::PositiveNumber);
  sbm->add_option("--p-in", spec.p_in, "within-class edge probability")->check(CLI::Range(0.0, 1.0));
  sbm->add_option("--p-out", spec.p_out, "cross-class edge probability")->check(CLI::Range(0.0, 1.0));
  sbm->add_option("--feat-dim", spec.feat_dim, "feature dimension (0: none)");
  sbm->add_option("--feat-sep", spec.feat_sep, "std of class means");
  sbm->add_option("--feat-noise", spec.feat_noise, "std of node noise");
  sbm->add_option("--seed", spec.seed, "seed");
  sbm->add_option("--out-prefix", s_prefix, "writes PREFIX.edges, PREFIX.labels.csv, PREFIX.features.csv")->required();

  // spectrum
  auto* spectrum = with_config(app.add_subcommand("spectrum", "graph Fourier spectrum of a signal"));
  GraphArgs sp_graph;
  sp_graph.attach(spectrum);
  std::string sp_signal, sp_out;
  spectrum->add_option("--signal", sp_signal, "label-diff:a,b or file:path (one value per line)")->required();
  spectrum->add_option("--out", sp_out, "CSV path (default stdout)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    auto parse = [&](std::vector<std::string> a) {
      std::reverse(a.begin(), a.end());
      app.parse(a);
    };
    parse(args);
    // Config values are spliced in after the subcommand name for every
    // option not already given on the command line, then parsed again.
    for (auto& [sub, path] : config_paths) {
      if (!*sub || path.empty()) continue;
      std::vector<std::string> extra;
      for (const auto& [key, value] : io::read_config(path)) {
        auto* opt = sub->get_option_no_throw("--" + key);
        if (!opt || key == "config") throw CLI::ValidationError(path, "unknown config key '" + key + "'");
        if (opt->count() > 0) continue;
        if (opt->get_type_size() == 0) {
          if (value == "true" || value == "1") extra.push_back("--" + key);
        } else {
          extra.push_back("--" + key);
          extra.push_back(value);
        }
      }
      auto at = std::find(args.begin(), args.end(), sub->get_name());
      args.insert(at + 1, extra.begin(), extra.end());
      app.clear();
      parse(args);
      break;
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) {
      AnalysisReport rep;
      LabeledGraph g = an_graph.load(&rep.notices);
      rep.provenance.input_sha256 = an_graph.hashes();
      auto sg = SpectralGraph::analyze(std::move(g));
      rep.graph = summarize(sg.graph);
      rep.indicators = indicator_report(sg, an_max_k);
      if (!sg.graph.connected()) rep.notices.push_back("graph is disconnected; zero eigenvalue has multiplicity > 1");
      if (!an_filters.empty()) {
        if (sg.graph.num_classes() != 2) {
          rep.notices.push_back("bounds need exactly two classes (K=" + std::to_string(sg.graph.num_classes()) +
                                "); skipped. Use --reduce for a one-vs-rest view");
        } else {
          if (!an_features.empty()) rep.provenance.input_sha256["features"] = sha256_file(an_features);
          auto [x0, x1] = bound_inputs(sg.graph, an_features);
          for (const auto& f : an_filters) {
            rep.bounds.push_back(bound_report(parse_filter(f), sg, x0, x1));
            rep.verdicts.push_back(bound_verdict(rep.bounds.back()));
          }
        }
      }
      if (!an_plot.empty()) write_plot_data(an_plot, rep.indicators);
      emit(analysis_json(rep), an_out);
      for (const auto& v : rep.verdicts)
        if (!verdict_ok(v)) return 1;
      return 0;
    }

    if (*bounds) {
      std::vector<std::string> notices;
      LabeledGraph g = bd_graph.load(&notices);
      if (g.num_classes() != 2)
        throw Unsupported("bounds need exactly two classes; use --reduce for a one-vs-rest view");
      auto sg = SpectralGraph::analyze(std::move(g));
      auto [x0, x1] = bound_inputs(sg.graph, bd_features);
      json reports = json::array(), verdicts = json::array();
      bool ok = true;
      for (const auto& f : bd_filters) {
        BoundReport b = bound_report(parse_filter(f), sg, x0, x1);
        reports.push_back(bound_json(b));
        verdicts.push_back(bound_verdict(b));
        ok = ok && verdict_ok(verdicts.back());
      }
      auto hashes = bd_graph.hashes();
      if (!bd_features.empty()) hashes["features"] = sha256_file(bd_features);
      emit({{"bounds", reports},
            {"verdicts", verdicts},
            {"notices", notices},
            {"inputs", bd_features.empty() ? "label indicators" : "features"},
            {"provenance", {{"tool_version", kToolVersion}, {"input_sha256", hashes}}}},
           bd_out);
      return ok ? 0 : 1;
    }

    if (*validate) {
      if (vcfg.n_min > vcfg.n_max) throw InvalidInput("--n-min exceeds --n-max");
      auto verdicts = run_suite(v_suite, vcfg);
      json rep = validation_report(v_suite, vcfg, verdicts);
      emit(rep, v_out);
      return rep.at("passed").get<bool>() ? 0 : 1;
    }

    if (*train) {
      mcfg.variant = demuf::parse_variant(t_model);
      if (!t_depth.empty()) mcfg.depths = t_depth;
      mcfg.masking = !t_no_mask;
      auto sg = SpectralGraph::analyze(io::read_graph(t_graph, t_labels));
      demuf::NodeData data;
      data.features = io::read_features(t_features, sg.n());
      data.labels = sg.graph.labels();
      data.classes = static_cast<Eigen::Index>(sg.graph.num_classes());
      data.split = demuf::make_split(sg.n(), mcfg.train_fraction, mcfg.val_fraction, mcfg.seed);
      auto res = demuf::train(data, sg.spectrum, mcfg);
      json m = metrics_json(res, mcfg);
      m["provenance"] = {{"input_sha256",
                          {{"graph", sha256_file(t_graph)},
                           {"labels", sha256_file(t_labels)},
                           {"features", sha256_file(t_features)}}}};
      emit(m, t_out);
      return 0;
    }

    if (*sbm) {
      auto s = generate_sbm(spec);
      io::write_edge_list(s_prefix + ".edges", s.graph);
      io::write_labels(s_prefix + ".labels.csv", s.graph.labels());
      if (spec.feat_dim > 0) io::write_features(s_prefix + ".features.csv", s.features);
      std::cerr << "wrote " << s_prefix << ".{edges,labels.csv" << (spec.feat_dim > 0 ? ",features.csv" : "")
                << "} (n=" << s.graph.n() << ", edges=" << s.graph.num_edges() << ")\n";
      return 0;
    }

    if (*spectrum) {
      LabeledGraph g = sp_graph.load();
      auto sg = SpectralGraph::analyze(std::move(g));
      Vector x;
      if (sp_signal.rfind("label-diff:", 0) == 0) {
        std::string arg = sp_signal.substr(11);
        auto comma = arg.find(',');
        if (comma == std::string::npos) throw InvalidInput("expected label-diff:a,b");
        x = label_difference(sg.graph, std::stoi(arg.substr(0, comma)), std::stoi(arg.substr(comma + 1)));
      } else if (sp_signal.rfind("file:", 0) == 0) {
        Matrix m = io::read_features(sp_signal.substr(5), sg.n());
        if (m.cols() != 1) throw InvalidInput("signal file must have one column");
        x = m.col(0);
      } else {
        throw InvalidInput("unknown signal '" + sp_signal + "' (label-diff:a,b or file:path)");
      }
      Spectrum spc = signal_spectrum(sg.spectrum, x);
      Vector p = spc.probabilities();
      std::vector<std::vector<double>> rows;
      for (Eigen::Index i = 0; i < p.size(); ++i)
        rows.push_back({static_cast<double>(i), sg.spectrum.eigenvalues(i), spc.coefficients(i), p(i)});
      std::vector<std::string> header{"index", "eigenvalue", "coefficient", "probability"};
      if (sp_out.empty())
        io::write_csv(std::cout, header, rows);
      else
        io::write_csv(sp_out, header, rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
