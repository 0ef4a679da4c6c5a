#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "skelmatch/skeleton.hpp"
#include "skelmatch/tensor_io.hpp"
#include "support/fixtures.hpp"

using namespace skelmatch;
using namespace skelmatch::testing;

TEST_CASE("parse_ntu_skeleton reads constant fixture") {
    std::istringstream in(ntu_text(constant_joints(2, 25, 0.5)));
    const SkeletonSequence seq = parse_ntu_skeleton(in, "fixture");
    CHECK(seq.frames == 2);
    CHECK(seq.bodies == 1);
    CHECK(seq.joints_per_body == 25);
    for (double v : seq.coords) CHECK(v == 0.5);
}

TEST_CASE("parse_ntu_skeleton drops zero-body frames") {
    auto frames = constant_joints(1, 25, 0.5);
    std::ostringstream out;
    out << 2 << "\n";
    out << 1 << "\n" << "7 0 1 1 1 1 0 0 0 2\n" << 25 << "\n";
    for (int j = 0; j < 25; ++j) out << "0.5 0.5 0.5\n";
    out << 0 << "\n";  // frame 2: no bodies
    std::istringstream in(out.str());
    const SkeletonSequence seq = parse_ntu_skeleton(in, "fixture");
    CHECK(seq.frames == 1);
}

TEST_CASE("parse_ntu_skeleton keeps per-joint series") {
    auto frames = constant_joints(3, 25, 0.0);
    for (int t = 0; t < 3; ++t) frames[t][9] = {1.0 + t, 0.0, 0.0};
    std::istringstream in(ntu_text(frames));
    const SkeletonSequence seq = parse_ntu_skeleton(in, "fixture");
    for (int t = 0; t < 3; ++t) {
        CHECK(seq.coord(t, 0, 9, 0) == 1.0 + t);
        CHECK(seq.coord(t, 0, 8, 0) == 0.0);
    }
}

TEST_CASE("parse_ntu_skeleton error paths carry line numbers") {
    SUBCASE("malformed frame count") {
        std::istringstream in("abc\n");
        CHECK_THROWS_WITH_AS(parse_ntu_skeleton(in, "f"),
                             doctest::Contains("f:1"), Error);
    }
    SUBCASE("truncated file") {
        std::istringstream in("2\n1\n7 0 0 0 0 0 0 0 0 2\n25\n0 0 0\n");
        try {
            parse_ntu_skeleton(in, "f");
            FAIL("expected parse error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::kParse);
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }
    SUBCASE("non-numeric joint field") {
        std::ostringstream out;
        out << "1\n1\n7 0 0 0 0 0 0 0 0 2\n2\n0 0 0\n0 zzz 0\n";
        std::istringstream in(out.str());
        try {
            parse_ntu_skeleton(in, "f");
            FAIL("expected parse error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("f:6") != std::string::npos);
            CHECK(std::string(e.what()).find("non-numeric") != std::string::npos);
        }
    }
    SUBCASE("empty after cleaning") {
        std::istringstream in("1\n0\n");
        CHECK_THROWS_WITH_AS(parse_ntu_skeleton(in, "f"),
                             doctest::Contains("empty-after-cleaning"), Error);
    }
}

TEST_CASE("parse_json_sequence") {
    std::istringstream in(R"({"frames": [[[[1,2,3],[4,5,6]]]], "label": 7})");
    const SkeletonSequence seq = parse_json_sequence(in, "j");
    CHECK(seq.frames == 1);
    CHECK(seq.bodies == 1);
    CHECK(seq.joints_per_body == 2);
    CHECK(seq.coord(0, 0, 1, 2) == 6.0);
    CHECK(seq.label == 7);

    std::istringstream bad(R"({"frames": [[[[1,2],[4,5,6]]]]})");
    CHECK_THROWS_AS(parse_json_sequence(bad, "j"), Error);
}

namespace {

SkeletonSequence two_body_sequence(bool swap) {
    // body A static at the origin, body B oscillating
    SkeletonSequence seq;
    seq.frames = 4;
    seq.bodies = 2;
    seq.joints_per_body = 2;
    seq.coords.assign(4 * 2 * 2 * 3, 0.0);
    seq.body_present.assign(4 * 2, 1);
    const int moving = swap ? 0 : 1;
    for (int t = 0; t < 4; ++t)
        for (int j = 0; j < 2; ++j)
            seq.coord(t, moving, j, 0) = (t % 2 == 0) ? 1.0 : -1.0;
    return seq;
}

}  // namespace

TEST_CASE("select_bodies") {
    SUBCASE("single body is identity") {
        std::istringstream in(ntu_text(constant_joints(2, 3, 0.25)));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        const SkeletonSequence out = select_bodies(seq, BodyMode::kPrimary);
        CHECK(out.coords == seq.coords);
        CHECK(out.bodies == 1);
    }
    SUBCASE("moving body wins regardless of order") {
        for (bool swap : {false, true}) {
            const SkeletonSequence seq = two_body_sequence(swap);
            const SkeletonSequence out = select_bodies(seq, BodyMode::kPrimary);
            CHECK(out.bodies == 1);
            CHECK(out.coord(0, 0, 0, 0) == 1.0);  // the oscillating body
        }
    }
    SUBCASE("variance tie keeps body 0") {
        SkeletonSequence seq = two_body_sequence(false);
        // make body 0 a shifted copy of body 1: equal variance, different values
        for (int t = 0; t < 4; ++t)
            for (int j = 0; j < 2; ++j) {
                seq.coord(t, 0, j, 0) = seq.coord(t, 1, j, 0) + 5.0;
                seq.coord(t, 0, j, 1) = 9.0;
            }
        const SkeletonSequence out = select_bodies(seq, BodyMode::kPrimary);
        CHECK(out.coord(0, 0, 0, 1) == 9.0);
    }
    SUBCASE("both mode zero-fills a missing second body") {
        std::istringstream in(ntu_text(constant_joints(2, 3, 0.25)));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        const SkeletonSequence out = select_bodies(seq, BodyMode::kBoth);
        CHECK(out.bodies == 2);
        CHECK(out.coord(0, 0, 0, 0) == 0.25);
        CHECK(out.coord(0, 1, 0, 0) == 0.0);
        CHECK_FALSE(out.present(0, 1));
    }
}

TEST_CASE("resample_frames") {
    SUBCASE("identity when grids coincide") {
        std::istringstream in(ntu_text(constant_joints(8, 4, 0.0)));
        SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        for (int t = 0; t < 8; ++t) seq.coord(t, 0, 2, 1) = std::sin(0.7 * t);
        const SkeletonSequence out = resample_frames(seq, 8);
        CHECK(out.coords == seq.coords);
    }
    SUBCASE("constant stays constant") {
        std::istringstream in(ntu_text(constant_joints(5, 4, 0.625)));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        const SkeletonSequence out = resample_frames(seq, 16);
        for (int t = 0; t < 16; ++t) CHECK(out.coord(t, 0, 1, 0) == 0.625);
    }
    SUBCASE("linear series (0,1) onto T=4") {
        auto frames = constant_joints(2, 2, 0.0);
        frames[1][0] = {1.0, 1.0, 1.0};
        std::istringstream in(ntu_text(frames));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        const SkeletonSequence out = resample_frames(seq, 4);
        // oracle: closed-form linear interpolation at 0, 1/3, 2/3, 1
        CHECK(out.coord(0, 0, 0, 0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(out.coord(1, 0, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(out.coord(2, 0, 0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(out.coord(3, 0, 0, 0) == 1.0);
    }
    SUBCASE("single frame replicates") {
        std::istringstream in(ntu_text(constant_joints(1, 4, 2.5)));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        const SkeletonSequence out = resample_frames(seq, 4);
        CHECK(out.frames == 4);
        for (int t = 0; t < 4; ++t) CHECK(out.coord(t, 0, 0, 0) == 2.5);
    }
    SUBCASE("invalid target length") {
        std::istringstream in(ntu_text(constant_joints(2, 4, 0.0)));
        const SkeletonSequence seq = parse_ntu_skeleton(in, "f");
        CHECK_THROWS_WITH_AS(resample_frames(seq, 6),
                             doctest::Contains("invalid-target-length"), Error);
        CHECK_THROWS_AS(resample_frames(seq, 2), Error);
    }
}

TEST_CASE("raw_features") {
    auto frames = constant_joints(3, 4, 0.0);
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < 4; ++j)
            frames[t][j] = {1.0 * j + t, 2.0 * j, 0.5 * t};
    std::istringstream in(ntu_text(frames));
    const SkeletonSequence seq = parse_ntu_skeleton(in, "f");

    SUBCASE("no centering is a pure relayout") {
        const FeatureMap map = raw_features(seq, false);
        CHECK(map.channels == 3);
        CHECK(map.joints == 4);
        CHECK(map.frames == 3);
        for (int t = 0; t < 3; ++t)
            for (int j = 0; j < 4; ++j)
                for (int k = 0; k < 3; ++k)
                    CHECK(map.at(k, j, t) == seq.coord(t, 0, j, k));
    }
    SUBCASE("centering zeroes the spine base") {
        const FeatureMap map = raw_features(seq, true);
        for (int t = 0; t < 3; ++t)
            for (int k = 0; k < 3; ++k) CHECK(map.at(k, 0, t) == 0.0);
    }
    SUBCASE("translation cancels under centering") {
        SkeletonSequence moved = seq;
        for (int t = 0; t < 3; ++t)
            for (int j = 0; j < 4; ++j)
                for (int k = 0; k < 3; ++k) moved.coord(t, 0, j, k) += 17.5;
        const FeatureMap a = raw_features(seq, true);
        const FeatureMap b = raw_features(moved, true);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("label_from_source_id") {
    CHECK(label_from_source_id("S001C003P008R001A001") == 1);
    CHECK(label_from_source_id("S018C003P008R001A115") == 115);
    CHECK(label_from_source_id("0003-L_A_1") == 1);
    CHECK(label_from_source_id("0005-L_A_26") == 26);
    CHECK_FALSE(label_from_source_id("no_action_tag").has_value());
}

TEST_CASE("tensor round-trip is byte identical for f64") {
    const FeatureMap map = random_map(4, 25, 8, 99);
    std::ostringstream first;
    write_tensor(map, first, TensorDType::kF64);
    std::istringstream in(first.str());
    const FeatureMap back = read_tensor(in, "mem");
    CHECK(back.data == map.data);
    CHECK(back.channels == 4);
    CHECK(back.joints == 25);
    CHECK(back.frames == 8);
    std::ostringstream second;
    write_tensor(back, second, TensorDType::kF64);
    CHECK(first.str() == second.str());
}

TEST_CASE("tensor f32 round-trip within one float ulp") {
    const FeatureMap map = random_map(3, 5, 4, 7);
    std::ostringstream out;
    write_tensor(map, out, TensorDType::kF32);
    std::istringstream in(out.str());
    const FeatureMap back = read_tensor(in, "mem");
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        const float expected = static_cast<float>(map.data[i]);
        CHECK(static_cast<float>(back.data[i]) == expected);
    }
}

TEST_CASE("tensor error paths") {
    const FeatureMap map = random_map(2, 2, 2, 3);
    std::ostringstream out;
    write_tensor(map, out, TensorDType::kF32);
    std::string bytes = out.str();

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        std::istringstream in(bytes);
        CHECK_THROWS_WITH_AS(read_tensor(in, "mem"), doctest::Contains("bad magic"),
                             Error);
    }
    SUBCASE("unsupported version") {
        bytes[4] = 9;
        std::istringstream in(bytes);
        CHECK_THROWS_WITH_AS(read_tensor(in, "mem"),
                             doctest::Contains("unsupported version"), Error);
    }
    SUBCASE("payload too short") {
        // header says 2x2x2 f32 (32 bytes) but only 7 floats follow
        bytes.resize(24 + 7 * 4);
        std::istringstream in(bytes);
        CHECK_THROWS_WITH_AS(read_tensor(in, "mem"),
                             doctest::Contains("payload-size-mismatch"), Error);
    }
    SUBCASE("trailing bytes") {
        bytes += "zz";
        std::istringstream in(bytes);
        CHECK_THROWS_WITH_AS(read_tensor(in, "mem"),
                             doctest::Contains("payload-size-mismatch"), Error);
    }
    SUBCASE("dim overflow") {
        // dims patched to 2^20 x 2^20 x 2
        const unsigned char big[4] = {0x00, 0x00, 0x10, 0x00};
        std::memcpy(bytes.data() + 8, big, 4);
        std::memcpy(bytes.data() + 12, big, 4);
        std::istringstream in(bytes);
        CHECK_THROWS_WITH_AS(read_tensor(in, "mem"), doctest::Contains("dim-overflow"),
                             Error);
    }
}

TEST_CASE("parse -> write -> read is lossless for f64") {
    std::istringstream in(ntu_text(constant_joints(4, 25, 0.123456789012345)));
    SkeletonSequence seq = parse_ntu_skeleton(in, "f");
    for (int t = 0; t < 4; ++t) seq.coord(t, 0, 7, 2) = 1e-7 * (t + 1) / 3.0;
    const FeatureMap map = raw_features(seq, false);
    std::ostringstream out;
    write_tensor(map, out, TensorDType::kF64);
    std::istringstream back_in(out.str());
    const FeatureMap back = read_tensor(back_in, "mem");
    CHECK(back.data == map.data);
}
