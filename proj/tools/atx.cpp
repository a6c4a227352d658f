// Command line front end: run scenarios, check traces, sweep interleavings.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "atx/checker.hpp"
#include "atx/run.hpp"
#include "atx/scenario.hpp"
#include "atx/sweep.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

int fail(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return kConfigError;
}

json checkJson(const atx::CheckReport& rep) {
  json out;
  out["pass"] = rep.allPass;
  out["properties"] = json::array();
  for (const auto& pr : rep.results) {
    json p{{"name", pr.name}, {"pass", pr.pass}};
    if (!pr.detail.empty()) p["detail"] = pr.detail;
    out["properties"].push_back(std::move(p));
  }
  return out;
}

void printCheck(const atx::CheckReport& rep) {
  for (const auto& pr : rep.results) {
    std::cout << (pr.pass ? "  ok  " : " FAIL ") << pr.name;
    if (!pr.detail.empty()) std::cout << "  (" << pr.detail << ")";
    std::cout << "\n";
  }
}

json reportJson(const atx::RunReport& rep) {
  json out;
  out["transfers"] = json::array();
  for (const auto& t : rep.transfers)
    out["transfers"].push_back(
        {{"label", t.label}, {"result", t.result}, {"tx", t.txId}, {"rtts", t.rtts}});
  out["consensus"] = json::object();
  for (const auto& [acc, k] : rep.consensusInvocations) out["consensus"][acc] = k;
  out["commits"] = rep.commits;
  out["hitBound"] = rep.hitBound;
  if (!rep.queried.empty()) {
    out["queried"] = json::object();
    for (const auto& [acc, ids] : rep.queried) out["queried"][acc] = ids;
  }
  return out;
}

int cmdRun(const std::string& scenarioPath, const std::string& outPath,
           const std::string& reportPath, bool query, bool check) {
  auto specR = atx::loadScenarioFile(scenarioPath);
  if (!specR.ok()) return fail(specR.note());
  atx::RunOptions opt;
  opt.queryAccountsAfter = query;
  auto runR = atx::runScenario(*specR, opt);
  if (!runR.ok()) return fail(runR.note());
  atx::RunReport rep = runR.take();

  for (const auto& t : rep.transfers) {
    std::cout << "transfer " << t.label << ": " << t.result
              << (t.txId.empty() ? "" : " tx=" + t.txId.substr(0, 12));
    if (t.rtts > 0)
      std::cout << " rtts=" << t.rtts;  // only meaningful for synchronous runs
    std::cout << "\n";
  }
  for (const auto& [acc, k] : rep.consensusInvocations)
    std::cout << "consensus " << acc << ": " << k << " invocation"
              << (k == 1 ? "" : "s") << "\n";
  std::cout << "commits: " << rep.commits << "\n";
  for (const auto& [acc, ids] : rep.queried)
    std::cout << "query " << acc << ": " << ids.size() << " transactions\n";
  if (rep.hitBound) std::cout << "warning: event budget exhausted\n";

  if (!outPath.empty()) {
    std::ofstream f(outPath);
    if (!f) return fail("cannot write " + outPath);
    f << rep.trace.serialize();
  }

  atx::CheckReport chk;
  if (check) {
    chk = atx::checkTrace(rep.trace);
    printCheck(chk);
  }

  if (!reportPath.empty()) {
    json j = reportJson(rep);
    if (check) j["check"] = checkJson(chk);
    std::ofstream f(reportPath);
    if (!f) return fail("cannot write " + reportPath);
    f << j.dump(2) << "\n";
  }
  return check && !chk.allPass ? kViolation : kOk;
}

int cmdCheck(const std::string& tracePath) {
  std::ifstream f(tracePath);
  if (!f) return fail("cannot read " + tracePath);
  std::stringstream ss;
  ss << f.rdbuf();
  auto traceR = atx::Trace::parse(ss.str());
  if (!traceR.ok()) return fail(traceR.note());
  atx::CheckReport rep = atx::checkTrace(*traceR);
  printCheck(rep);
  std::cout << (rep.allPass ? "all properties hold" : "violation found") << "\n";
  return rep.allPass ? kOk : kViolation;
}

int cmdSweep(const std::string& scenarioPath, uint64_t maxRuns, uint64_t maxEvents,
             bool check) {
  auto specR = atx::loadScenarioFile(scenarioPath);
  if (!specR.ok()) return fail(specR.note());
  atx::SweepOptions opt;
  opt.maxRuns = maxRuns;
  opt.maxEventsPerRun = maxEvents;
  uint64_t violations = 0;
  std::string firstDetail;
  auto visit = [&](const atx::RunReport& run) {
    if (!check) return;
    atx::CheckReport rep = atx::checkTrace(run.trace);
    if (rep.allPass) return;
    ++violations;
    if (firstDetail.empty())
      for (const auto& pr : rep.results)
        if (!pr.pass) {
          firstDetail = pr.name + ": " + pr.detail;
          break;
        }
  };
  auto sw = atx::interleavingSweep(*specR, opt, visit);
  if (!sw.ok()) return fail(sw.note());
  std::cout << "runs: " << sw->runs << "\n"
            << "distinct traces: " << sw->distinctTraces << "\n"
            << "exhausted: " << (sw->exhausted ? "yes" : "no (run cap)") << "\n";
  if (check) {
    std::cout << "violations: " << violations << "\n";
    if (violations) {
      std::cout << "first: " << firstDetail << "\n";
      return kViolation;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shared-account asset transfer: simulator, checker, sweep"};
  app.require_subcommand(1);

  std::string scenarioPath, outPath, reportPath, tracePath;
  bool query = false, check = false;
  uint64_t maxRuns = 4096, maxEvents = 500'000;

  auto* run = app.add_subcommand("run", "execute a scenario and report outcomes");
  run->add_option("--scenario", scenarioPath, "scenario json file")->required();
  run->add_option("--out", outPath, "write the trace here");
  run->add_option("--report", reportPath, "write a json report here");
  run->add_flag("--query", query, "query each account's transactions afterwards");
  run->add_flag("--check", check, "check the trace before exiting");

  auto* chk = app.add_subcommand("check", "verify a recorded trace");
  chk->add_option("--trace", tracePath, "trace file to verify")->required();

  auto* swp = app.add_subcommand("sweep", "enumerate delivery interleavings");
  swp->add_option("--scenario", scenarioPath, "scenario json file")->required();
  swp->add_option("--max-runs", maxRuns, "stop after this many runs");
  swp->add_option("--max-events", maxEvents, "per-run event budget");
  swp->add_flag("--check", check, "check every run's trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (run->parsed()) return cmdRun(scenarioPath, outPath, reportPath, query, check);
  if (chk->parsed()) return cmdCheck(tracePath);
  return cmdSweep(scenarioPath, maxRuns, maxEvents, check);
}
