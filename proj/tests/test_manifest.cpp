#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tdcr/errors.hpp"
#include "tdcr/manifest.hpp"

namespace tdcr {
namespace {

namespace fs = std::filesystem;

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, JsonRoundTrip) {
  Manifest m;
  m.subcommand = "fit-gpr";
  m.arguments = {"--data", "d.csv", "--seed", "3"};
  m.config_path = "cfg.ini";
  m.effective_config = "[gpr]\nn_starts = 3\n";
  m.seed = 18446744073709551615ull;
  m.inputs["d.csv"] = std::string(64, 'a');
  m.outputs["g.json"] = std::string(64, 'b');
  const Manifest r = Manifest::from_json(m.to_json());
  EXPECT_EQ(r.subcommand, m.subcommand);
  EXPECT_EQ(r.arguments, m.arguments);
  EXPECT_EQ(r.effective_config, m.effective_config);
  EXPECT_EQ(r.seed, m.seed);
  EXPECT_EQ(r.inputs, m.inputs);
  EXPECT_EQ(r.outputs, m.outputs);
  EXPECT_EQ(r.tool_version, kToolVersion);
  EXPECT_EQ(r.to_json(), m.to_json());
}

TEST(Manifest, DetectsModifiedAndMissingFiles) {
  const fs::path dir = fs::temp_directory_path() / "tdcr_manifest_test";
  fs::create_directories(dir);
  const std::string a = (dir / "a.txt").string(), b = (dir / "b.txt").string();
  std::ofstream(a) << "alpha";
  std::ofstream(b) << "beta";
  Manifest m;
  m.add_input(a);
  m.add_output(b);
  EXPECT_EQ(m.inputs.at(a), sha256_hex("alpha"));
  EXPECT_TRUE(m.mismatched_files().empty());
  std::ofstream(b) << "changed";
  EXPECT_EQ(m.mismatched_files(), std::vector<std::string>{b});
  fs::remove(a);
  EXPECT_EQ(m.mismatched_files().size(), 2u);
  const std::string mp = (dir / "manifest.json").string();
  m.save(mp);
  EXPECT_EQ(Manifest::load(mp).outputs, m.outputs);
  fs::remove_all(dir);
}

TEST(Manifest, MalformedJsonIsAnIoError) {
  EXPECT_THROW(Manifest::from_json("{not json"), IoError);
  EXPECT_THROW(Manifest::from_json("{}"), IoError);
  EXPECT_THROW(sha256_file("/nonexistent/file"), IoError);
}

}  // namespace
}  // namespace tdcr
