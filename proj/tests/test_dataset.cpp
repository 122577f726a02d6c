#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdcr/dataset.hpp"

namespace tdcr {
namespace {

Dataset make_dataset(int n) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.step = i;
    s.lengths = Vec4(0.21 + 1e-4 * i, 0.22, 0.2 - 1e-5 * i, 0.22);
    s.x = Vec3(0.01 * i, -0.002, 0.2 + 1.0 / 3.0);
    s.x_next = Vec3(0.01 * (i + 1), -0.002, 0.2);
    s.p_sim = Vec3(0.1, 0.2, 0.3 + i * 1e-17);
    s.source = i % 3 == 0 ? SampleSource::kSim : (i % 3 == 1 ? SampleSource::kTwin : SampleSource::kGprGenerated);
    d.samples.push_back(s);
  }
  return d;
}

TEST(Dataset, CsvHeaderIsExact) {
  std::ostringstream os;
  write_dataset_csv(os, make_dataset(1));
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "step,L1,L2,L3,L4,x,y,z,x_next,y_next,z_next,sim_x,sim_y,sim_z,source");
}

TEST(Dataset, CsvRoundTripIsBitExact) {
  const Dataset d = make_dataset(30);
  const std::string path = (std::filesystem::temp_directory_path() / "tdcr_dataset_rt.csv").string();
  write_dataset_csv(path, d);
  const Dataset r = read_dataset_csv(path);
  ASSERT_EQ(r.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(r.samples[i].step, d.samples[i].step);
    EXPECT_EQ(r.samples[i].lengths, d.samples[i].lengths);
    EXPECT_EQ(r.samples[i].x, d.samples[i].x);
    EXPECT_EQ(r.samples[i].x_next, d.samples[i].x_next);
    EXPECT_EQ(r.samples[i].p_sim, d.samples[i].p_sim);
    EXPECT_EQ(r.samples[i].source, d.samples[i].source);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, MalformedFilesAreRejected) {
  const std::string path = (std::filesystem::temp_directory_path() / "tdcr_dataset_bad.csv").string();
  EXPECT_THROW(read_dataset_csv(path + ".missing"), IoError);
  std::ofstream(path) << "step,a,b\n1,2,3\n";
  EXPECT_THROW(read_dataset_csv(path), IoError);
  std::ofstream(path) << "step,L1,L2,L3,L4,x,y,z,x_next,y_next,z_next,sim_x,sim_y,sim_z,source\n0,1,2,3\n";
  EXPECT_THROW(read_dataset_csv(path), Error);
  std::ofstream(path) << "step,L1,L2,L3,L4,x,y,z,x_next,y_next,z_next,sim_x,sim_y,sim_z,source\n"
                         "0,1,1,1,1,0,0,0,0,0,0,0,0,0,martian\n";
  EXPECT_THROW(read_dataset_csv(path), InvalidInputError);
  std::filesystem::remove(path);
}

TEST(Dataset, SplitIsContiguousAndComplete) {
  Dataset d = make_dataset(10);
  d.split_ratio = 0.7;
  const auto [train, val] = d.split();
  ASSERT_EQ(train.size(), 7u);
  ASSERT_EQ(val.size(), 3u);
  EXPECT_EQ(train.samples.back().step, 6);
  EXPECT_EQ(val.samples.front().step, 7);
  d.split_ratio = 1.0;
  EXPECT_THROW(d.split(), InvalidInputError);
}

TEST(Dataset, HeadAndValidate) {
  Dataset d = make_dataset(5);
  EXPECT_EQ(d.head(2).size(), 2u);
  EXPECT_THROW(d.head(6), InvalidInputError);
  d.validate();
  d.samples[3].x_next.y() = std::nan("");
  EXPECT_THROW(d.validate(), InvalidInputError);
}

TEST(SampleSource, NamesRoundTrip) {
  for (SampleSource s : {SampleSource::kSim, SampleSource::kTwin, SampleSource::kGprGenerated})
    EXPECT_EQ(sample_source_from_string(to_string(s)), s);
}

}  // namespace
}  // namespace tdcr
