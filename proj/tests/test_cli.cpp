#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "coaplab/capture.hpp"
#include "coaplab/pipeline.hpp"

using namespace coaplab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int status = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(COAPLAB_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("coaplab_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate: default hour, determinism, zero duration") {
  const auto a = scratch("gen_a");
  const auto b = scratch("gen_b");
  REQUIRE(run("generate --out " + a.string()).status == 0);
  REQUIRE(run("generate --out " + b.string()).status == 0);
  CHECK(sha256_file(a / "capture.pcap") == sha256_file(b / "capture.pcap"));
  CHECK(fs::exists(a / "manifest.json"));

  const auto packets = read_pcap(a / "capture.pcap");
  const auto log = read_attack_log(a / "attacks.json");
  const Ipv4 server = Ipv4::parse("192.168.1.9");
  std::int64_t attack = 0;
  for (const auto& p : packets) {
    if ((p.src_ip == Ipv4::parse("192.168.1.12") || p.src_ip == Ipv4::parse("192.168.1.5")) && p.dst_ip == server) {
      ++attack;
    }
  }
  CHECK(attack == 4200);
  CHECK(log.events.size() == 14);

  CHECK(run("generate --duration 0 --out " + scratch("gen_zero").string()).status != 0);
  fs::remove_all(b);

  SUBCASE("label") {
    const std::string inputs = " --pcap " + (a / "capture.pcap").string() + " --attacks " + (a / "attacks.json").string();
    const auto lab = scratch("label");
    const Result ok = run("label" + inputs + " --out " + lab.string());
    CHECK(ok.status == 0);
    CHECK(ok.output.find(R"("malicious":7)") != std::string::npos);

    const Result none = run("label" + inputs + " --threshold 1000000000 --no-crosscheck --out " + lab.string());
    CHECK(none.status == 0);
    CHECK(none.output.find(R"("malicious":0)") != std::string::npos);

    CHECK(run("label" + inputs + " --threshold 1000000000 --out " + lab.string()).status != 0);

    const auto empty = scratch("empty.pcap");
    write_pcap({}, empty);
    CHECK(run("label --pcap " + empty.string() + " --attacks " + (a / "attacks.json").string() + " --out " +
              lab.string())
              .status != 0);
    fs::remove_all(lab);
    fs::remove(empty);
  }
  SUBCASE("features, train, eval, report chain") {
    const std::string inputs = " --pcap " + (a / "capture.pcap").string() + " --attacks " + (a / "attacks.json").string();
    const auto feat = scratch("feat");
    const auto models = scratch("models");
    const auto eval = scratch("eval");
    REQUIRE(run("features" + inputs + " --out " + feat.string()).status == 0);
    REQUIRE(run("train --features " + feat.string() + " --models nb tree --out " + models.string()).status == 0);
    CHECK(fs::exists(models / "naive_bayes.json"));
    CHECK(fs::exists(models / "decision_tree.json"));
    REQUIRE(run("eval --features " + feat.string() + " --model-dir " + models.string() + " --models nb tree --out " +
                eval.string())
                .status == 0);
    const json report = json::parse(read_text_file(eval / "report.json"));
    CHECK(report.at("models").size() == 2);
    const Result printed = run("report --out " + eval.string());
    CHECK(printed.status == 0);
    CHECK(printed.output.find("naive_bayes") != std::string::npos);
    fs::remove_all(feat);
    fs::remove_all(models);
    fs::remove_all(eval);
  }
  fs::remove_all(a);
}

TEST_CASE("pipeline flags") {
  const auto a = scratch("pipe_a");
  const auto b = scratch("pipe_b");
  const std::string common = " --duration 1801 --models nb --seed 3";
  REQUIRE(run("pipeline" + common + " --out " + a.string()).status == 0);
  REQUIRE(run("pipeline" + common + " --out " + b.string()).status == 0);
  const json report = json::parse(read_text_file(a / "report.json"));
  REQUIRE(report.at("models").size() == 1);
  CHECK(report.at("models")[0].at("model") == "naive_bayes");
  CHECK(report.at("seed") == 3);
  CHECK(read_text_file(a / "report.json") == read_text_file(b / "report.json"));

  SUBCASE("flags override the config file") {
    const auto cfg = scratch("cfg.json");
    write_text_file(cfg, R"({"scenario": {"duration": 900}, "pipeline": {"test_fraction": 0.5, "models": ["svm"]}})");
    const auto c = scratch("pipe_c");
    REQUIRE(run("pipeline --config " + cfg.string() + " --test-fraction 0.25 --out " + c.string()).status == 0);
    const json m = json::parse(read_text_file(c / "manifest.json"));
    CHECK(m.at("config").at("scenario").at("duration") == 900.0);
    CHECK(m.at("config").at("pipeline").at("test_fraction") == 0.25);
    CHECK(m.at("config").at("pipeline").at("models") == json::array({"svm"}));
    fs::remove_all(c);
    fs::remove(cfg);
  }
  SUBCASE("stage failure exits nonzero and names the stage") {
    const Result r = run("pipeline --duration 1801 --threshold 100000 --models nb --out " + scratch("pipe_f").string());
    CHECK(r.status != 0);
    CHECK(r.output.find("stage label") != std::string::npos);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}
