#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "doc/dataio.hpp"

using namespace doc;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() /
          (std::string("doc_dataio_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  void write_text(const fs::path& p, const std::string& text) const {
    std::ofstream(dir / p) << text;
  }
};

Image random_image(int w, int h, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0, 1);
  Image img(w, h, channels);
  for (auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = uni(rng);
  return img;
}

double max_diff(const Image& a, const Image& b) {
  double m = 0;
  for (int c = 0; c < a.channels(); ++c)
    m = std::max(m, (a.channel(c) - b.channel(c)).abs().maxCoeff());
  return m;
}

}  // namespace

using ImageIo = TempDir;
using DepthIo = TempDir;
using TextIo = TempDir;
using ManifestIo = TempDir;

TEST_F(ImageIo, EightBitRoundTripQuantises) {
  const Image img = random_image(13, 7, 3, 1);
  io::save_image(dir / "a.png", img);
  const Image back = io::load_image(dir / "a.png");
  ASSERT_EQ(back.channels(), 3);
  ASSERT_EQ(back.width(), 13);
  ASSERT_EQ(back.height(), 7);
  EXPECT_LE(max_diff(img, back), 0.5 / 255 + 1e-12);
}

TEST_F(ImageIo, SixteenBitRoundTripQuantises) {
  const Image img = random_image(9, 5, 1, 2);
  io::save_image(dir / "a.png", img, 16);
  const Image back = io::load_image(dir / "a.png");
  ASSERT_EQ(back.channels(), 1);
  EXPECT_LE(max_diff(img, back), 0.5 / 65535 + 1e-12);
}

// Binary PPM written by hand: red, green, blue pixels in RGB order.
TEST_F(ImageIo, ColourChannelsAreRgb) {
  {
    std::ofstream out(dir / "rgb.ppm", std::ios::binary);
    out << "P6\n3 1\n255\n";
    const unsigned char px[9] = {255, 0, 0, 0, 255, 0, 0, 0, 255};
    out.write(reinterpret_cast<const char*>(px), 9);
  }
  const Image img = io::load_image(dir / "rgb.ppm");
  ASSERT_EQ(img.channels(), 3);
  for (int u = 0; u < 3; ++u)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(img.channel(c)(0, u), c == u ? 1.0 : 0.0);
}

TEST_F(ImageIo, ResizeChangesResolution) {
  io::save_image(dir / "a.png", Image(GridD::Constant(10, 20, 0.6)));
  const Image img = io::load_image(dir / "a.png", io::Size{10, 5});
  EXPECT_EQ(img.width(), 10);
  EXPECT_EQ(img.height(), 5);
  EXPECT_NEAR(img.channel(0)(2, 3), 153.0 / 255, 1e-12);
}

TEST_F(ImageIo, MissingOrCorruptFilesThrow) {
  EXPECT_THROW((void)io::load_image(dir / "none.png"), InputError);
  write_text("bad.png", "not an image");
  EXPECT_THROW((void)io::load_image(dir / "bad.png"), InputError);
  EXPECT_THROW(io::save_image(dir / "x.png", Image(2, 2, 2)), InputError);
  EXPECT_THROW(io::save_image(dir / "x.png", Image(2, 2, 1), 12), InputError);
}

TEST_F(ImageIo, MaskAndLabelRoundTrip) {
  MaskMap m(GridD(2, 3));
  m.weights << 0, 1, 0.5, 1, 0, 0.2;
  io::save_mask(dir / "m.png", m);
  const MaskMap back = io::load_mask(dir / "m.png");
  EXPECT_LE((back.weights - m.weights).abs().maxCoeff(), 0.5 / 255 + 1e-12);
  EXPECT_EQ(back.weights(0, 1), 1.0);

  Grid<std::uint8_t> labels(2, 2);
  labels << 0, 1, 255, 1;
  io::save_labels(dir / "l.png", labels);
  EXPECT_TRUE((io::load_labels(dir / "l.png") == labels).all());
}

TEST_F(DepthIo, PngUsesScaleDivisor) {
  DepthMap d(GridD(1, 3));
  d.meters << 0.0, 1.5, 10.0;
  io::save_depth_png(dir / "d.png", d);
  const DepthMap back = io::load_depth(dir / "d.png");
  EXPECT_EQ(back.meters(0, 0), 0.0);
  EXPECT_EQ(back.meters(0, 1), 384.0 / 256);
  EXPECT_EQ(back.meters(0, 2), 10.0);
  const DepthMap scaled = io::load_depth(dir / "d.png", 1000.0);
  EXPECT_NEAR(scaled.meters(0, 2), 2.56, 1e-12);
}

// Layout written by hand: u32 width, u32 height, float32 row-major.
TEST_F(DepthIo, RawLayout) {
  {
    std::ofstream out(dir / "d.bin", std::ios::binary);
    const std::uint32_t w = 2, h = 2;
    const float vals[4] = {1.0f, 2.5f, 0.0f, 7.25f};
    unsigned char buf[4];
    for (std::uint32_t x : {w, h}) {
      for (int k = 0; k < 4; ++k) buf[k] = (x >> (8 * k)) & 0xff;
      out.write(reinterpret_cast<const char*>(buf), 4);
    }
    for (float f : vals) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int k = 0; k < 4; ++k) buf[k] = (bits >> (8 * k)) & 0xff;
      out.write(reinterpret_cast<const char*>(buf), 4);
    }
  }
  const DepthMap d = io::load_depth(dir / "d.bin");
  ASSERT_EQ(d.meters.rows(), 2);
  ASSERT_EQ(d.meters.cols(), 2);
  EXPECT_EQ(d.meters(0, 0), 1.0);
  EXPECT_EQ(d.meters(0, 1), 2.5);
  EXPECT_EQ(d.meters(1, 0), 0.0);
  EXPECT_EQ(d.meters(1, 1), 7.25);

  io::save_depth_raw(dir / "e.bin", d);
  EXPECT_EQ(fs::file_size(dir / "e.bin"), 8u + 16u);
  EXPECT_TRUE((io::load_depth(dir / "e.bin").meters == d.meters).all());
}

TEST_F(DepthIo, TruncatedRawThrows) {
  write_text("d.bin", std::string("\x04\x00\x00\x00\x04\x00\x00\x00" "abc", 11));
  EXPECT_THROW((void)io::load_depth(dir / "d.bin"), InputError);
}

TEST_F(TextIo, PlainIntrinsics) {
  write_text("K.txt", "718.8 719.1 607.2 185.2 1241 376\n");
  const Camera K = io::load_intrinsics(dir / "K.txt");
  EXPECT_EQ(K.fx, 718.8);
  EXPECT_EQ(K.fy, 719.1);
  EXPECT_EQ(K.cx, 607.2);
  EXPECT_EQ(K.cy, 185.2);
  EXPECT_EQ(K.width, 1241);
  EXPECT_EQ(K.height, 376);
  io::save_intrinsics(dir / "K2.txt", K);
  const Camera back = io::load_intrinsics(dir / "K2.txt");
  EXPECT_EQ(back.fx, K.fx);
  EXPECT_EQ(back.height, K.height);
}

TEST_F(TextIo, KittiCalibration) {
  write_text("calib.txt",
             "P0: 7.1e+02 0 6.0e+02 0 0 7.1e+02 1.8e+02 0 0 0 1 0\n"
             "P1: 7.1e+02 0 6.0e+02 -3.8e+02 0 7.1e+02 1.8e+02 0 0 0 1 0\n"
             "P2: 7.188560e+02 0 6.071928e+02 4.538225e+01 0 7.188560e+02 1.852157e+02 "
             "-1.130887e-01 0 0 1 3.779761e-03\n"
             "P3: 7.2e+02 0 6.1e+02 -3.3e+02 0 7.2e+02 1.9e+02 2.0e+00 0 0 1 3.0e-03\n");
  const Camera K = io::load_intrinsics(dir / "calib.txt", io::Size{1241, 376});
  EXPECT_EQ(K.fx, 718.856);
  EXPECT_EQ(K.fy, 718.856);
  EXPECT_EQ(K.cx, 607.1928);
  EXPECT_EQ(K.cy, 185.2157);
  EXPECT_EQ(K.width, 1241);
  EXPECT_EQ(io::load_intrinsics(dir / "calib.txt", io::Size{1241, 376}, "P0").fx, 710.0);
  EXPECT_THROW((void)io::load_intrinsics(dir / "calib.txt"), InputError);
}

TEST_F(TextIo, KittiPosesRoundTripAndOrthonormalise) {
  std::vector<Mat4d> poses;
  poses.push_back(Mat4d::Identity());
  poses.push_back(Pose(Vec3d(0.1, -0.2, 0.3), Vec3d(1, 2, 3)).matrix());
  io::save_poses_kitti(dir / "p.txt", poses);
  const auto back = io::load_poses_kitti(dir / "p.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_LT((back[1] - poses[1]).cwiseAbs().maxCoeff(), 1e-14);

  write_text("q.txt", "1.00001 0 0 5 0 1 0 6 0 0 1 7\n");
  const auto q = io::load_poses_kitti(dir / "q.txt");
  EXPECT_LT((q[0].topLeftCorner<3, 3>() - Mat3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(q[0](2, 3), 7.0);

  write_text("r.txt", "2 0 0 5 0 1 0 6 0 0 1 7\n");
  EXPECT_THROW((void)io::load_poses_kitti(dir / "r.txt"), InputError);
  write_text("s.txt", "1 0 0 5 0 1 0 6 0 0 1\n");
  EXPECT_THROW((void)io::load_poses_kitti(dir / "s.txt"), InputError);
}

TEST_F(TextIo, RelativePosesRoundTripExactly) {
  const std::vector<Pose> poses{Pose(Vec3d(0.1, 1e-17, -0.3), Vec3d(1.0 / 3, 2, 3)), Pose()};
  io::save_relative_poses(dir / "r.txt", poses);
  const auto back = io::load_relative_poses(dir / "r.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].params(), poses[0].params());
  EXPECT_EQ(back[1].params(), poses[1].params());
}

TEST_F(TextIo, TumQuaternionConvention) {
  write_text("t.txt", "# t tx ty tz qx qy qz qw\n0.5 1 2 3 0 0 0.7071067811865476 0.7071067811865476\n");
  const Trajectory t = io::load_trajectory(dir / "t.txt", io::TrajectoryFormat::Tum);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.poses[0].timestamp, 0.5);
  Mat4d expected = Mat4d::Identity();
  expected.topLeftCorner<3, 3>() << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  expected.topRightCorner<3, 1>() << 1, 2, 3;
  EXPECT_LT((t[0] - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(TextIo, TrajectoryRoundTripBothFormats) {
  Trajectory traj = accumulate({Pose(Vec3d(0.1, 0.2, -0.1), Vec3d(0, 0, 1)),
                                Pose(Vec3d(-2.5, 0.1, 0.3), Vec3d(1, 0, 1))});
  traj.poses[1].timestamp = 0.1;
  for (auto fmt : {io::TrajectoryFormat::Kitti, io::TrajectoryFormat::Tum}) {
    io::save_trajectory(traj, fmt, dir / "traj.txt");
    const Trajectory back = io::load_trajectory(dir / "traj.txt", fmt);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_LT((back[i] - traj[i]).cwiseAbs().maxCoeff(), 1e-12);
    if (fmt == io::TrajectoryFormat::Tum) {
      EXPECT_EQ(back.poses[0].timestamp, 0.0);  // index stands in
      EXPECT_EQ(back.poses[1].timestamp, 0.1);
    }
  }
  EXPECT_EQ(io::parse_trajectory_format("tum"), io::TrajectoryFormat::Tum);
  EXPECT_THROW((void)io::parse_trajectory_format("euroc"), InputError);
}

TEST_F(ManifestIo, ParsesSchema) {
  write_text("m.json", R"({
    "intrinsics": {"fx": 100, "fy": 101, "cx": 3.5, "cy": 2.5, "width": 8, "height": 6},
    "depth_scale": 1000,
    "resize": [4, 3],
    "initial_poses": {"format": "kitti", "path": "init.txt"},
    "ground_truth": "gt.txt",
    "frames": [
      {"image": "a.png", "depth": "a.png", "timestamp": 0.0},
      {"image": "/abs/b.png", "depth": "b.png", "mask": "mb.png"}
    ]})");
  const io::SequenceManifest m = io::load_manifest(dir / "m.json");
  const Camera& K = std::get<Camera>(m.intrinsics);
  EXPECT_EQ(K.fy, 101);
  EXPECT_EQ(K.width, 8);
  EXPECT_EQ(m.depth_scale, 1000);
  ASSERT_TRUE(m.resize);
  EXPECT_EQ(m.resize->width, 4);
  EXPECT_EQ(m.initial_format, io::InitialPoseFormat::KittiAbsolute);
  ASSERT_EQ(m.frames.size(), 2u);
  EXPECT_EQ(m.frames[0].timestamp, 0.0);
  EXPECT_FALSE(m.frames[1].timestamp);
  EXPECT_TRUE(m.frames[1].mask);
  EXPECT_EQ(m.resolve(m.frames[0].image), dir / "a.png");
  EXPECT_EQ(m.resolve(m.frames[1].image), fs::path("/abs/b.png"));

  io::save_manifest(dir / "n.json", m);
  const io::SequenceManifest n = io::load_manifest(dir / "n.json");
  EXPECT_EQ(n.frames.size(), 2u);
  EXPECT_EQ(*n.ground_truth, *m.ground_truth);
  EXPECT_EQ(std::get<Camera>(n.intrinsics).cx, 3.5);
}

TEST_F(ManifestIo, RejectsMalformed) {
  write_text("bad.json", "{ not json");
  EXPECT_THROW((void)io::load_manifest(dir / "bad.json"), InputError);
  write_text("nokey.json", R"({"intrinsics": "K.txt", "frames": []})");
  EXPECT_THROW((void)io::load_manifest(dir / "nokey.json"), InputError);
  write_text("fmt.json",
             R"({"intrinsics": "K.txt", "initial_poses": {"format": "xyz", "path": "p"},
                 "frames": []})");
  EXPECT_THROW((void)io::load_manifest(dir / "fmt.json"), InputError);
}

TEST_F(ManifestIo, LoadsSequenceAndScalesIntrinsics) {
  for (int i = 0; i < 3; ++i) {
    io::save_image(dir / ("i" + std::to_string(i) + ".png"), random_image(8, 6, 3, i));
    io::save_depth_raw(dir / ("d" + std::to_string(i) + ".bin"),
                       DepthMap(GridD::Constant(6, 8, 2.0 + i)));
  }
  write_text("K.txt", "100 100 3.5 2.5 8 6\n");
  io::save_relative_poses(dir / "rel.txt", {Pose(), Pose(Vec3d::Zero(), Vec3d(0, 0, 1))});
  io::SequenceManifest m;
  m.base_dir = dir;
  m.intrinsics = fs::path("K.txt");
  m.initial_poses = "rel.txt";
  for (int i = 0; i < 3; ++i)
    m.frames.push_back({"i" + std::to_string(i) + ".png", "d" + std::to_string(i) + ".bin", {}, {}});
  io::LoadedSequence seq = io::load_sequence(m);
  EXPECT_EQ(seq.frames.size(), 3u);
  EXPECT_EQ(seq.initial_relatives.size(), 2u);
  EXPECT_EQ(seq.K.fx, 100);
  EXPECT_EQ(seq.frames[2].depth.meters(0, 0), 4.0);

  m.resize = io::Size{4, 3};
  seq = io::load_sequence(m);
  EXPECT_EQ(seq.frames[0].image.width(), 4);
  EXPECT_EQ(seq.K.fx, 50);
  EXPECT_EQ(seq.K.width, 4);

  m.frames.pop_back();
  EXPECT_THROW((void)io::load_sequence(m), InputError);  // 2 frames, 2 relatives
  m.frames.push_back({"i2.png", "missing.bin", {}, {}});
  EXPECT_THROW((void)io::load_sequence(m), InputError);
}
