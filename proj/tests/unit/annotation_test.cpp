#include <gtest/gtest.h>

#include "support.hpp"
#include "synmix/annotation.hpp"
#include "synmix/error.hpp"
#include "synmix/image.hpp"
#include "synmix/manifest.hpp"
#include "synmix/random.hpp"

using namespace synmix;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoFailure;
}

}  // namespace

TEST(LabelFile, ParsesBoxesAndPolygons) {
  const auto entries = parse_label_file("0 0.5 0.5 0.2 0.4\n\n2 0.1 0.1 0.3 0.1 0.2 0.4\n", 3);
  ASSERT_EQ(entries.size(), 2U);
  const auto& b = std::get<BoxLabel>(entries[0]);
  EXPECT_EQ(b.class_id, 0);
  EXPECT_DOUBLE_EQ(b.box.h, 0.4);
  const auto& p = std::get<PolygonAnnotation>(entries[1]);
  EXPECT_EQ(p.class_id, 2);
  ASSERT_EQ(p.vertices.size(), 3U);
  EXPECT_DOUBLE_EQ(p.vertices[2].y(), 0.4);
}

TEST(LabelFile, EmitIsCanonicalAndRoundTrips) {
  const std::string canonical = "1 0.250000 0.500000 0.125000 0.062500\n"
                                "0 0.100000 0.100000 0.300000 0.100000 0.200000 0.400000\n";
  const auto entries = parse_label_file(canonical, 3);
  EXPECT_EQ(emit_label_file(entries), canonical);
  EXPECT_EQ(emit_label_file(parse_label_file(emit_label_file(entries), 3)), canonical);
}

TEST(LabelFile, RejectsBadInput) {
  EXPECT_EQ(code_of([] { parse_label_file("0 0.5 0.5 0.2\n", 3); }), Errc::MalformedLine);
  EXPECT_EQ(code_of([] { parse_label_file("0 0.5 0.5 0.2 0.2 0.1\n", 3); }), Errc::MalformedLine);
  EXPECT_EQ(code_of([] { parse_label_file("a 0.5 0.5 0.2 0.2\n", 3); }), Errc::MalformedLine);
  EXPECT_EQ(code_of([] { parse_label_file("0 0.5 nan 0.2 0.2\n", 3); }), Errc::MalformedLine);
  EXPECT_EQ(code_of([] { parse_label_file("3 0.5 0.5 0.2 0.2\n", 3); }), Errc::UnknownClass);
  EXPECT_EQ(code_of([] { parse_label_file("0 1.5 0.5 0.2 0.2\n", 3); }),
            Errc::CoordinateOutOfRange);
  EXPECT_EQ(code_of([] { parse_label_file("0 0.5 0.5 0 0.2\n", 3); }), Errc::CoordinateOutOfRange);
}

TEST(LabelFile, FileRoundTrip) {
  synmix::testing::TempDir tmp("labels");
  const std::vector<LabelEntry> entries{BoxLabel{1, {0.5, 0.5, 0.25, 0.25}}};
  write_label_file(tmp / "a.txt", entries);
  const auto back = read_label_file(tmp / "a.txt", 2);
  ASSERT_EQ(back.size(), 1U);
  EXPECT_EQ(std::get<BoxLabel>(back[0]).box, (BoundingBox{0.5, 0.5, 0.25, 0.25}));
  EXPECT_EQ(code_of([&] { read_label_file(tmp / "missing.txt", 2); }), Errc::IoFailure);
}

TEST(Geometry, PolygonBoundingBox) {
  const PolygonAnnotation p{1, {{0.2, 0.3}, {0.6, 0.1}, {0.5, 0.7}, {0.1, 0.4}}};
  const auto b = bbox_from_polygon(p);
  EXPECT_NEAR(b.x_min(), 0.1, 1e-12);
  EXPECT_NEAR(b.x_max(), 0.6, 1e-12);
  EXPECT_NEAR(b.y_min(), 0.1, 1e-12);
  EXPECT_NEAR(b.y_max(), 0.7, 1e-12);
  EXPECT_EQ(code_of([] { bbox_from_polygon({0, {{0.1, 0.1}, {0.2, 0.2}}}); }),
            Errc::DegenerateExtent);
  EXPECT_EQ(code_of([] { bbox_from_polygon({0, {{0.1, 0.1}, {0.2, 0.1}, {0.3, 0.1}}}); }),
            Errc::DegenerateExtent);
}

TEST(Geometry, BoxPolygonRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double w = 0.05 + 0.5 * rng.uniform(), h = 0.05 + 0.5 * rng.uniform();
    const BoundingBox b{w / 2 + (1 - w) * rng.uniform(), h / 2 + (1 - h) * rng.uniform(), w, h};
    const auto back = bbox_from_polygon(polygon_from_bbox(0, b));
    EXPECT_NEAR(back.cx, b.cx, 1e-12);
    EXPECT_NEAR(back.cy, b.cy, 1e-12);
    EXPECT_NEAR(back.w, b.w, 1e-12);
    EXPECT_NEAR(back.h, b.h, 1e-12);
  }
}

TEST(Geometry, RasterizedRectangleCoversPixelCentres) {
  const auto poly = polygon_from_bbox(0, BoundingBox::from_corners(0.25, 0.125, 0.75, 0.5));
  const auto mask = rasterize_polygon(poly, 16, 16);
  const auto ext = mask_extent(mask);
  ASSERT_TRUE(ext.has_value());
  EXPECT_EQ((*ext)(0), 4);
  EXPECT_EQ((*ext)(1), 2);
  EXPECT_EQ((*ext)(2), 8);
  EXPECT_EQ((*ext)(3), 6);
  EXPECT_EQ(mask.cast<int>().sum(), 48);
}

TEST(Geometry, RasterMaskStaysInsidePolygonBox) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    PolygonAnnotation p{0, {}};
    for (int k = 0; k < 6; ++k) p.vertices.emplace_back(rng.uniform(), rng.uniform());
    const auto b = bbox_from_polygon(p);
    const auto mask = rasterize_polygon(p, 40, 30);
    for (Eigen::Index y = 0; y < mask.rows(); ++y) {
      for (Eigen::Index x = 0; x < mask.cols(); ++x) {
        if (!mask(y, x)) continue;
        const double xc = (x + 0.5) / 40.0, yc = (y + 0.5) / 30.0;
        EXPECT_GE(xc, b.x_min());
        EXPECT_LE(xc, b.x_max());
        EXPECT_GE(yc, b.y_min());
        EXPECT_LE(yc, b.y_max());
      }
    }
  }
  EXPECT_FALSE(mask_extent(BitMask::Zero(4, 4)).has_value());
  EXPECT_EQ(code_of([] { rasterize_polygon({0, {{0, 0}, {1, 0}, {1, 1}}}, 0, 5); }),
            Errc::ZeroDimension);
}

TEST(PadToSquare, CentresSmallCrops) {
  Image<int> crop = Image<int>::Constant(2, 4, 7);
  const auto out = pad_to_square(crop, 8);
  EXPECT_EQ(out.rows(), 8);
  EXPECT_EQ(out.cols(), 8);
  EXPECT_EQ(out.sum(), 7 * 8);
  EXPECT_EQ(out(3, 2), 7);
  EXPECT_EQ(out(4, 5), 7);
  EXPECT_EQ(out(2, 2), 0);
}

TEST(PadToSquare, ShrinksLargeCrops) {
  Image<int> crop = Image<int>::Constant(100, 1000, 1);
  const auto out = pad_to_square(crop, 512);
  EXPECT_EQ(out.sum(), 512 * 51);
  EXPECT_EQ(code_of([] { pad_to_square(Image<int>(0, 3), 8); }), Errc::EmptyCrop);
  EXPECT_EQ(code_of([] { pad_to_square(Image<int>(Image<int>::Ones(2, 2)), 0); }), Errc::ZeroDimension);
}

TEST(ClassMap, BotanicalMapping) {
  const auto m = ClassMap::botanical();
  EXPECT_EQ(m.map(0), 0);
  EXPECT_EQ(m.map(1), 2);
  EXPECT_EQ(m.map(4), 1);
  EXPECT_EQ(code_of([&] { m.map(5); }), Errc::UnknownClass);
  const auto back = ClassMap::from_json(m.to_json());
  for (int i = 0; i < 5; ++i) EXPECT_EQ(back.map(i), m.map(i));
}

TEST(ClassMap, PartialMappingAndRemap) {
  const ClassMap m({"a", "b"}, {"x"}, {{"a", "x"}});
  EXPECT_EQ(code_of([&] { m.map(1); }), Errc::UnmappedClass);
  EXPECT_EQ(code_of([] { ClassMap({"a"}, {"x"}, {{"a", "y"}}); }), Errc::ConfigInvalid);
  LabeledImage li;
  li.instances.push_back({0, {0.5, 0.5, 0.1, 0.1}, polygon_from_bbox(0, {0.5, 0.5, 0.1, 0.1})});
  const ClassMap shift({"a", "b"}, {"x", "y"}, {{"a", "y"}, {"b", "x"}});
  const auto out = remap_classes(li, shift);
  EXPECT_EQ(out.instances[0].class_id, 1);
  EXPECT_EQ(out.instances[0].polygon->class_id, 1);
}

TEST(Image, PngRoundTrip) {
  synmix::testing::TempDir tmp("png");
  const GrayImage img = render_scene(5, 33, 21);
  EXPECT_GE(img.minCoeff(), 0.0);
  EXPECT_LE(img.maxCoeff(), 1.0);
  write_gray_png(tmp / "a.png", img);
  const auto back = read_gray_png(tmp / "a.png");
  ASSERT_EQ(back.rows(), 21);
  ASSERT_EQ(back.cols(), 33);
  EXPECT_LE((back - img).abs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  EXPECT_EQ(png_dimensions(tmp / "a.png"), std::make_pair(33, 21));

  BitMask mask = BitMask::Zero(5, 6);
  mask(2, 3) = 1;
  write_mask_png(tmp / "m.png", mask);
  EXPECT_TRUE((read_mask_png(tmp / "m.png") == mask).all());
  EXPECT_EQ(code_of([&] { read_gray_png(tmp / "none.png"); }), Errc::IoFailure);
}

TEST(Image, RenderSceneIsDeterministic) {
  EXPECT_TRUE((render_scene(9, 40, 40) == render_scene(9, 40, 40)).all());
  EXPECT_FALSE((render_scene(9, 40, 40) == render_scene(10, 40, 40)).all());
}

TEST(Manifest, SaveLoadAndRelativePaths) {
  synmix::testing::TempDir tmp("manifest");
  Manifest m;
  ManifestEntry e;
  e.image.id = "a";
  e.image.path = tmp / "imgs" / "a.png";
  e.image.width = 4;
  e.image.height = 3;
  e.labels_path = tmp / "imgs" / "a.txt";
  e.model_annotated = true;
  m.images.push_back(e);
  m.meta = {{"note", "x"}};
  m.relative_to(tmp.path()).save(tmp / "m.json");
  const auto text = read_text_file(tmp / "m.json");
  EXPECT_NE(text.find("\"imgs/a.png\""), std::string::npos);
  const auto back = Manifest::load(tmp / "m.json");
  ASSERT_EQ(back.images.size(), 1U);
  EXPECT_EQ(back.images[0].image.path, e.image.path);
  EXPECT_TRUE(back.images[0].model_annotated);
  EXPECT_EQ(back.meta["note"], "x");
  back.relative_to(tmp.path()).save(tmp / "m2.json");
  EXPECT_EQ(read_text_file(tmp / "m2.json"), text);
  EXPECT_NE(back.find("a"), nullptr);
  EXPECT_EQ(back.find("b"), nullptr);
}

TEST(Random, DerivedSeedsAreStable) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_EQ(hash_string(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hash_string("a"), 0xaf63dc4c8601ec8cULL);
  Rng a(4), b(4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(5);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(c.below(7), 7U);
}
