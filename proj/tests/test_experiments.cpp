#include "dilgp/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dilgp;
using nlohmann::json;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dilgp_exp_" + name);
  std::filesystem::remove_all(p);
  return p;
}

json fast_fit(const std::string& model) {
  return json{{"data", {{"generator", "synthetic_1d"}, {"seed", 0}}},
              {"model", model},
              {"train", {{"t1_outer", 4}, {"t2_inner", 2}}}};
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("generate writes both splits and is repeatable") {
  const auto a = cmd_generate({{"generator", "synthetic_1d"}, {"seed", 0}});
  const auto b = cmd_generate({{"generator", "synthetic_1d"}, {"seed", 0}});
  const std::string& train = a.at("train.csv");
  CHECK(std::count(train.begin(), train.end(), '\n') == 116);  // header + 115
  CHECK(a == b);
  CHECK_THROWS(cmd_generate({{"generator", "mnist"}}));
}

TEST_CASE("resolved config hides DIL-only fields for plain GPs") {
  const json gp = resolve_config("fit-eval", fast_fit("gp_gaussian"));
  CHECK_FALSE(gp.at("train").contains("lambda"));
  CHECK_FALSE(gp.contains("kernel"));
  const json dil = resolve_config("fit-eval", fast_fit("dil_gp"));
  CHECK(dil.at("train").contains("lambda"));
  CHECK(dil.at("train").at("t2_inner") == 2);
  CHECK_THROWS(resolve_config("fit-eval", fast_fit("svm")));
  CHECK_THROWS(resolve_config("train", json::object()));
}

TEST_CASE("fit-eval reports rmse and coverage") {
  const auto out = cmd_fit_eval(resolve_config("fit-eval", fast_fit("dil_gp")));
  const json rep = json::parse(out.at("report.json"));
  CHECK(rep.contains("rmse"));
  CHECK(rep.contains("coverage"));
  CHECK(rep.at("n_test") == 80);
  CHECK(out.count("trace.jsonl") == 1);
}

TEST_CASE("seed sweeps summarize as mean and max deviation") {
  json c = fast_fit("gp_rq");
  c["sweep"] = 3;
  c["per_domain"] = true;
  const json rep = json::parse(cmd_fit_eval(resolve_config("fit-eval", c)).at("report.json"));
  REQUIRE(rep.at("runs").size() == 3);
  double mean = 0.0;
  for (const auto& r : rep.at("runs")) mean += r.at("rmse").get<double>() / 3.0;
  CHECK(rep.at("summary").at("rmse_mean").get<double>() == doctest::Approx(mean));
  double dev = 0.0;
  for (const auto& r : rep.at("runs")) dev = std::max(dev, std::abs(r.at("rmse").get<double>() - mean));
  CHECK(rep.at("summary").at("rmse_max_dev").get<double>() == doctest::Approx(dev));
  CHECK(rep.at("per_domain_rmse").contains("2"));
}

TEST_CASE("selection uses dev seeds only and records every candidate") {
  FitEvalConfig c = resolve_config("fit-eval", fast_fit("dil_gp")).get<FitEvalConfig>();
  GridSelection g;
  g.dev_seeds = {100};
  g.lambdas = {0.1, 1.0};
  g.learning_rates = {0.01};
  const auto sel = select_hyperparameters(c, g);
  CHECK(sel.table.size() == 2);
  const auto applied = with_selection(c, sel);
  CHECK(applied.train.lambda == sel.lambda);
  CHECK(applied.train.eta1 == 0.01);
}

TEST_CASE("bo on the PID objective writes one record per proposal") {
  json c{{"objective", "quad_pid"},
         {"trajectory", "fig8"},
         {"bo", {{"t_bo", 4}, {"surrogate", {{"train", {{"t1_outer", 3}, {"t2_inner", 1}}}}}}}};
  const auto out = cmd_bo(resolve_config("bo", c));
  const std::string& trace = out.at("trace.jsonl");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
  const json s = json::parse(out.at("summary.json"));
  CHECK(s.contains("heldout_ace"));
  CHECK(out.count("trajectory_heldout.csv") == 1);
}

TEST_CASE("run_command writes a manifest that replays identically") {
  const auto dir = fresh_dir("run");
  const auto r = run_command("generate", {{"generator", "synthetic_2d"}, {"seed", 3}}, dir / "a");
  CHECK(std::filesystem::exists(dir / "a" / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "a" / "resolved_config.json"));
  CHECK(r.manifest.at("tool_version") == tool_version());
  const auto rep = replay(dir / "a" / "manifest.json", dir / "b");
  CHECK(rep.identical);
  std::ifstream a(dir / "a" / "train.csv"), b(dir / "b" / "train.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("failing commands write nothing") {
  const auto dir = fresh_dir("fail");
  CHECK_THROWS(run_command("generate", {{"generator", "nope"}}, dir));
  CHECK_FALSE(std::filesystem::exists(dir));
}

}  // TEST_SUITE
