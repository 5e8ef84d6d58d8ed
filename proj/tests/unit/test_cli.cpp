#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "kriss/io.hpp"

using namespace kriss;

namespace {

struct Outcome {
  int code;
  std::string out;
};

Outcome run(const std::string& args, const std::filesystem::path& dir) {
  const auto out = dir / "stdout.txt";
  const std::string cmd = std::string(KRISS_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(out)};
}

void write_entities(const std::filesystem::path& p) {
  std::ofstream(p) << R"({"id":"C1","name":"Emergency room","aliases":["ER"]})" "\n"
                   << R"({"id":"C2","name":"Estrogen receptor","aliases":["ER","ESR"]})" "\n"
                   << R"({"id":"C3","name":"Asthma","aliases":[]})" "\n";
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto dir = fixture::scratch_dir("cli_usage");
  const auto help = run("--help", dir);
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("generate"), std::string::npos);
  EXPECT_EQ(run("", dir).code, 2);
  EXPECT_EQ(run("frobnicate", dir).code, 2);
  EXPECT_EQ(run("generate --entities x.jsonl", dir).code, 2);
  EXPECT_EQ(run("eval --results a --gold b --entities c --format xml", dir).code, 2);
}

TEST(Cli, DataErrorsExitThree) {
  const auto dir = fixture::scratch_dir("cli_data");
  EXPECT_EQ(run("ontology validate --entities " + (dir / "absent.jsonl").string(), dir).code, 3);
  std::ofstream(dir / "bad.jsonl") << R"({"id":"C1","name":"x","aliases":["x"]})" "\n";
  EXPECT_EQ(run("ontology validate --entities " + (dir / "bad.jsonl").string(), dir).code, 3);
}

TEST(Cli, AmbiguityReportListsSharedSurfaces) {
  const auto dir = fixture::scratch_dir("cli_ambiguity");
  write_entities(dir / "e.jsonl");
  EXPECT_EQ(run("ontology validate --entities " + (dir / "e.jsonl").string(), dir).code, 0);
  const auto r = run("ontology ambiguity-report --entities " + (dir / "e.jsonl").string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "surface\tcount\tentity_ids\ner\t2\tC1,C2\n");
  const auto names_only = run("ontology ambiguity-report --no-aliases --entities " + (dir / "e.jsonl").string(), dir);
  EXPECT_EQ(names_only.out, "surface\tcount\tentity_ids\n");
}

TEST(Cli, SubcommandsChainIntoAReport) {
  const auto dir = fixture::scratch_dir("cli_chain");
  SyntheticConfig sc;
  sc.entities = 6;
  sc.documents = 200;
  sc.shared_alias_pairs = 1;
  write_synthetic_world(make_synthetic_world(sc), dir);
  const auto d = [&](const char* f) { return (dir / f).string(); };
  ASSERT_EQ(run("generate --entities " + d("entities.jsonl") + " --corpus " + d("corpus.jsonl") + " --out " +
                    d("mentions.jsonl"),
                dir).code,
            0);
  ASSERT_EQ(run("train --mentions " + d("mentions.jsonl") + " --entities " + d("entities.jsonl") + " --out " +
                    d("model.krsm") + " --set N=4 --set steps=5 --set dim=16 --set layers=1 --set heads=2",
                dir).code,
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "model.krsm.loss.tsv"));
  ASSERT_EQ(run("index build --model " + d("model.krsm") + " --mentions " + d("mentions.jsonl") + " --entities " +
                    d("entities.jsonl") + " --k-proto 4 --out " + d("index"),
                dir).code,
            0);
  ASSERT_EQ(run("link --index " + d("index") + " --model " + d("model.krsm") + " --queries " + d("heldout.jsonl") +
                    " --top-k 6 --fusion on --out " + d("results.jsonl"),
                dir).code,
            0);
  const auto report = run("eval --results " + d("results.jsonl") + " --gold " + d("heldout.jsonl") + " --entities " +
                              d("entities.jsonl") + " --topk 1,6",
                          dir);
  ASSERT_EQ(report.code, 0);
  const auto j = nlohmann::json::parse(report.out);
  EXPECT_DOUBLE_EQ(j.at("topk_oracle").at("6").get<double>(), 1.0);
  EXPECT_EQ(run("eval --results " + d("results.jsonl") + " --gold " + d("shared_alias_test.jsonl") + " --entities " +
                    d("entities.jsonl"),
                dir).code,
            3);
}
