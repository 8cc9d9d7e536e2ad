#include <catch2/catch_amalgamated.hpp>

#include <apadiag/dataset.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace apadiag;
using cd = std::complex<double>;

namespace {

// Small-but-real manifest so corpus builds stay fast.
DatasetManifest tiny_manifest() {
    DatasetManifest m;
    m.segment_len = 50;
    m.loop_segments = 2;
    m.capture_len = 400;  // 8 segments per capture
    m.n_captures_per_class = 2;
    return m;
}

Corpus toy_corpus(const std::vector<int>& class_sizes, int feature_len = 4) {
    Corpus c;
    c.scheme = LabelScheme::Single49;
    c.feature_len = static_cast<std::uint32_t>(feature_len);
    c.n_classes = static_cast<std::uint16_t>(class_sizes.size());
    std::size_t n = 0;
    for (const int s : class_sizes) n += static_cast<std::size_t>(s);
    for (std::size_t k = 0; k < class_sizes.size(); ++k)
        c.display_labels.push_back(static_cast<std::uint16_t>(k + 1));
    c.features = Matrix<float>(n, static_cast<std::size_t>(feature_len));
    std::size_t row = 0;
    for (std::size_t k = 0; k < class_sizes.size(); ++k)
        for (int i = 0; i < class_sizes[k]; ++i, ++row) {
            c.labels.push_back(static_cast<std::uint16_t>(k));
            for (int f = 0; f < feature_len; ++f)
                c.features.row(row)[f] = static_cast<float>(row * 10 + static_cast<std::size_t>(f));
        }
    return c;
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    REQUIRE(os.good());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string temp_path(const char* name) { return std::string("test_dataset_") + name + ".apad"; }

}  // namespace

TEST_CASE("default manifest plans the expected corpus sizes", "[dataset]") {
    const DatasetManifest m;
    const CorpusPlan p = plan_corpus(m);
    CHECK(p.n_classes == 49);
    CHECK(p.samples_per_class == 10000);
    CHECK(p.n_total == 490000);
    CHECK(p.feature_len == 10000);
    CHECK(p.train_per_class == 7000);
    CHECK(p.test_per_class == 3000);
    CHECK(p.train_total == 343000);
    CHECK(p.test_total == 147000);
}

TEST_CASE("segmentation lays out real parts then imaginary parts", "[dataset]") {
    IqFrame f;
    f.samples = {cd{1, -1}, cd{2, -2}, cd{3, -3}, cd{4, -4}, cd{5, -5}, cd{6, -6}};
    const auto segs = segment(f, 3);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0] == std::vector<float>{1, 2, 3, -1, -2, -3});
    CHECK(segs[1] == std::vector<float>{4, 5, 6, -4, -5, -6});

    CHECK_THROWS_AS(segment(f, 4), DataError);
    CHECK_THROWS_AS(segment(f, 0), ConfigError);
    CHECK_THROWS_MATCHES(segment(f, 4), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("remainder")));
}

TEST_CASE("manifest validation rejects inconsistent settings", "[dataset]") {
    auto m = tiny_manifest();
    m.capture_len = 401;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.split_fraction = 1.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.split_fraction = 0.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.attenuation_db = 0.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.phase_shift_deg = 0.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.multi_instances_per_class = 0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    m.loop_segments = 0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = tiny_manifest();
    CHECK_NOTHROW(m.validate());
    CHECK(m.segments_per_capture() == 8);
    CHECK(m.samples_per_class() == 16);
    CHECK(m.feature_len() == 100);
}

TEST_CASE("class index maps onto the fault layout", "[dataset]") {
    const DatasetManifest m;
    CHECK(single49_scenario(m, 0).kind == FaultKind::None);
    for (int c = 1; c <= 16; ++c) {
        const auto s = single49_scenario(m, c);
        CHECK(s.kind == FaultKind::ElementOff);
        CHECK(s.index == c - 1);
    }
    for (int c = 17; c <= 32; ++c) {
        const auto s = single49_scenario(m, c);
        CHECK(s.kind == FaultKind::Attenuation);
        CHECK(s.index == c - 17);
        CHECK(s.value == m.attenuation_db);
    }
    for (int c = 33; c <= 48; ++c) {
        const auto s = single49_scenario(m, c);
        CHECK(s.kind == FaultKind::PhaseShift);
        CHECK(s.index == c - 33);
        CHECK(s.value == m.phase_shift_deg);
    }
    CHECK_THROWS_AS(single49_scenario(m, 49), ConfigError);
    for (int c = 0; c < 49; ++c) CHECK(display_label(LabelScheme::Single49, c) == c + 1);
}

TEST_CASE("grouped-fault pools are distinct, sized, and avoid chip quads", "[dataset]") {
    auto m = tiny_manifest();
    m.scheme = LabelScheme::MultiGroup;

    CHECK(scenario_pool(m, 0).size() == 1);
    CHECK(scenario_pool(m, 0)[0].kind == FaultKind::None);

    for (int k = 1; k <= 6; ++k) {
        const auto pool = scenario_pool(m, k);
        REQUIRE(static_cast<int>(pool.size()) == m.multi_instances_per_class);
        std::set<std::vector<int>> seen;
        for (const auto& s : pool) {
            CHECK(s.kind == FaultKind::MultiOff);
            REQUIRE(static_cast<int>(s.elements.size()) == k);
            CHECK(std::is_sorted(s.elements.begin(), s.elements.end()));
            std::set<int> uniq(s.elements.begin(), s.elements.end());
            CHECK(static_cast<int>(uniq.size()) == k);
            CHECK(*uniq.begin() >= 0);
            CHECK(*uniq.rbegin() < 16);
            seen.insert(s.elements);
        }
        CHECK(seen.size() == pool.size());
        if (k == 4)
            for (const auto& s : pool)
                CHECK_FALSE(detail::is_chip_quad(s.elements, 16));
    }

    const auto chips = scenario_pool(m, 7);
    REQUIRE(chips.size() == 4);
    for (int chip = 0; chip < 4; ++chip) {
        CHECK(chips[static_cast<std::size_t>(chip)].kind == FaultKind::FullChipOff);
        CHECK(chips[static_cast<std::size_t>(chip)].index == chip);
    }
    CHECK_THROWS_AS(scenario_pool(m, 8), ConfigError);

    m.scheme = LabelScheme::Single49;
    const auto single = scenario_pool(m, 20);
    REQUIRE(single.size() == 1);
    CHECK(single[0].kind == FaultKind::Attenuation);
}

TEST_CASE("excitation loop has the planned length and is seed-stable", "[dataset]") {
    const auto m = tiny_manifest();
    const IqFrame loop = excitation_loop(m);
    CHECK(loop.samples.size() == 100);
    CHECK(loop.samples == excitation_loop(m).samples);
    auto m2 = m;
    m2.excitation_seed += 1;
    CHECK(loop.samples != excitation_loop(m2).samples);
}

TEST_CASE("steady loop response equals the mid-window of a tiled observation", "[dataset]") {
    const auto m = tiny_manifest();
    const IqFrame loop = excitation_loop(m);
    const PAModel pa = PAModel::default_bank(16, m.pa_seed, m.pa_memory_depth);
    const auto states = apply_fault(nominal_states(16), FaultScenario::element_off(4));

    const IqFrame steady = detail::steady_loop_response(m, pa, states, loop);
    REQUIRE(steady.samples.size() == loop.samples.size());

    IqFrame tiled;
    tiled.sample_rate_hz = loop.sample_rate_hz;
    for (int rep = 0; rep < 3; ++rep)
        tiled.samples.insert(tiled.samples.end(), loop.samples.begin(), loop.samples.end());
    const IqFrame full = observe(m.array, pa, states, tiled);
    const std::size_t L = loop.samples.size();
    for (std::size_t t = 0; t < L; ++t) REQUIRE(full.samples[L + t] == steady.samples[t]);
}

TEST_CASE("noise-free captures tile the loop exactly", "[dataset]") {
    auto m = tiny_manifest();
    m.base_snr_db = kSnrClean;
    const Corpus corpus = build_corpus(m);
    const auto n_seg = static_cast<std::size_t>(m.segments_per_capture());
    const std::size_t per_class = n_seg * static_cast<std::size_t>(m.n_captures_per_class);
    REQUIRE(corpus.n_samples() == per_class * 49);

    const auto row_vec = [&](std::size_t r) {
        return std::vector<float>(corpus.features.row(r), corpus.features.row(r) + corpus.feature_len);
    };

    for (int c = 0; c < 49; ++c) {
        std::set<std::vector<float>> distinct;
        for (std::size_t i = 0; i < per_class; ++i) distinct.insert(row_vec(static_cast<std::size_t>(c) * per_class + i));
        // Every capture replays the same loop from a segment-aligned offset,
        // so a class can expose at most loop_segments distinct feature rows.
        CHECK(static_cast<int>(distinct.size()) <= m.loop_segments);

        // Within one capture the loop period is exact.
        const std::size_t base = static_cast<std::size_t>(c) * per_class;
        for (std::size_t i = 0; i + static_cast<std::size_t>(m.loop_segments) < n_seg; ++i)
            REQUIRE(row_vec(base + i) == row_vec(base + i + static_cast<std::size_t>(m.loop_segments)));
    }
}

TEST_CASE("receiver noise differs across captures but builds reproduce bitwise", "[dataset]") {
    const auto m = tiny_manifest();
    const Corpus a = build_corpus(m);
    const Corpus b = build_corpus(m);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels == b.labels);
    CHECK(a.display_labels == b.display_labels);

    // Same class, same loop content, different captures: noise must differ.
    const auto n_seg = static_cast<std::size_t>(m.segments_per_capture());
    const auto row_vec = [&](const Corpus& c, std::size_t r) {
        return std::vector<float>(c.features.row(r), c.features.row(r) + c.feature_len);
    };
    CHECK(row_vec(a, 0) != row_vec(a, n_seg));

    auto m2 = m;
    m2.capture_seed += 1;
    const Corpus c = build_corpus(m2);
    CHECK(a.features.data != c.features.data);
}

TEST_CASE("class labels fill blocks in declared order", "[dataset]") {
    const auto m = tiny_manifest();
    const Corpus corpus = build_corpus(m);
    const auto per_class = static_cast<std::size_t>(m.samples_per_class());
    for (std::size_t r = 0; r < corpus.n_samples(); ++r) REQUIRE(corpus.labels[r] == r / per_class);
    REQUIRE(corpus.display_labels.size() == 49);
    for (int c = 0; c < 49; ++c) CHECK(corpus.display_labels[static_cast<std::size_t>(c)] == c + 1);
}

TEST_CASE("memory depth must stay below the loop length", "[dataset]") {
    auto m = tiny_manifest();
    m.pa_memory_depth = m.loop_segments * m.segment_len;
    CHECK_THROWS_AS(build_corpus(m), ConfigError);
}

TEST_CASE("per-class split is deterministic, disjoint, and rounded per class", "[dataset]") {
    const Corpus corpus = toy_corpus({10, 5, 3});
    const SplitIndices s = split_corpus(corpus, 0.7, 42);
    CHECK(s.train.size() == 7 + 4 + 2);
    CHECK(s.test.size() == 3 + 1 + 1);

    std::set<std::uint32_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == corpus.n_samples());

    std::map<std::uint16_t, int> train_per_class;
    for (const auto i : s.train) train_per_class[corpus.labels[i]]++;
    CHECK(train_per_class[0] == 7);
    CHECK(train_per_class[1] == 4);
    CHECK(train_per_class[2] == 2);

    const SplitIndices again = split_corpus(corpus, 0.7, 42);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);

    const SplitIndices other = split_corpus(corpus, 0.7, 43);
    CHECK(other.train != s.train);

    CHECK_THROWS_AS(split_corpus(corpus, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_corpus(corpus, 1.0, 1), ConfigError);
}

TEST_CASE("batch stream visits every index exactly once per pass", "[dataset]") {
    const Corpus corpus = toy_corpus({6, 4});
    const std::vector<std::uint32_t> subset = {0, 2, 4, 6, 8, 9};
    BatchStream stream(corpus, subset, 4, 11);
    CHECK(stream.n_batches() == 2);

    Matrix<float> X;
    std::vector<std::uint16_t> y;
    std::multiset<float> seen;
    std::vector<std::size_t> batch_sizes;
    while (stream.next(X, y)) {
        batch_sizes.push_back(X.rows);
        REQUIRE(X.cols == corpus.feature_len);
        REQUIRE(y.size() == X.rows);
        for (std::size_t r = 0; r < X.rows; ++r) seen.insert(X.row(r)[0]);
    }
    CHECK(batch_sizes == std::vector<std::size_t>{4, 2});

    std::multiset<float> expected;
    for (const auto i : subset) expected.insert(corpus.features.row(i)[0]);
    CHECK(seen == expected);
    CHECK_FALSE(stream.next(X, y));

    // Labels ride along with their rows.
    BatchStream stream2(corpus, subset, 3, 11);
    while (stream2.next(X, y))
        for (std::size_t r = 0; r < X.rows; ++r)
            REQUIRE(y[r] == (X.row(r)[0] < 60.0f ? 0 : 1));
}

TEST_CASE("batch shuffling is seed-deterministic and order-changing", "[dataset]") {
    const Corpus corpus = toy_corpus({12});
    const std::vector<std::uint32_t> idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const auto first_pass = [&](std::uint64_t seed) {
        BatchStream s(corpus, idx, 5, seed);
        Matrix<float> X;
        std::vector<std::uint16_t> y;
        std::vector<float> order;
        while (s.next(X, y))
            for (std::size_t r = 0; r < X.rows; ++r) order.push_back(X.row(r)[0]);
        return order;
    };
    CHECK(first_pass(7) == first_pass(7));
    CHECK(first_pass(7) != first_pass(8));

    BatchStream s(corpus, idx, 5, 7);
    Matrix<float> X;
    std::vector<std::uint16_t> y;
    std::vector<float> pass1, pass2;
    while (s.next(X, y))
        for (std::size_t r = 0; r < X.rows; ++r) pass1.push_back(X.row(r)[0]);
    s.reshuffle(8);
    while (s.next(X, y))
        for (std::size_t r = 0; r < X.rows; ++r) pass2.push_back(X.row(r)[0]);
    CHECK(pass1 != pass2);
    CHECK(std::multiset<float>(pass1.begin(), pass1.end()) == std::multiset<float>(pass2.begin(), pass2.end()));

    CHECK_THROWS_AS(BatchStream(corpus, idx, 0, 1), ConfigError);
    CHECK_THROWS_AS(BatchStream(corpus, {}, 4, 1), DataError);
}

TEST_CASE("container round-trips bitwise", "[dataset]") {
    auto m = tiny_manifest();
    m.n_captures_per_class = 1;
    const Corpus corpus = build_corpus(m);
    const auto path = temp_path("roundtrip");
    save_corpus(path, corpus);

    const Corpus loaded = load_corpus(path);
    CHECK(loaded.scheme == corpus.scheme);
    CHECK(loaded.feature_len == corpus.feature_len);
    CHECK(loaded.n_classes == corpus.n_classes);
    CHECK(loaded.display_labels == corpus.display_labels);
    CHECK(loaded.labels == corpus.labels);
    CHECK(loaded.features.data == corpus.features.data);

    const auto path2 = temp_path("roundtrip2");
    save_corpus(path2, loaded);
    CHECK(read_bytes(path) == read_bytes(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("container loading reports corruption precisely", "[dataset]") {
    const Corpus corpus = toy_corpus({3, 2});
    const auto path = temp_path("corrupt");
    save_corpus(path, corpus);
    const std::string good = read_bytes(path);

    SECTION("missing file") {
        CHECK_THROWS_MATCHES(load_corpus("no_such_file.apad"), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("cannot open")));
    }
    SECTION("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        write_bytes(path, bad);
        CHECK_THROWS_MATCHES(load_corpus(path), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("bad magic")));
    }
    SECTION("version mismatch") {
        std::string bad = good;
        bad[4] = 9;
        write_bytes(path, bad);
        CHECK_THROWS_MATCHES(load_corpus(path), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("version mismatch")));
    }
    SECTION("truncated payload") {
        write_bytes(path, good.substr(0, good.size() - 2));
        CHECK_THROWS_MATCHES(load_corpus(path), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("truncated")));
    }
    SECTION("unknown scheme") {
        std::string bad = good;
        bad[20] = 7;
        write_bytes(path, bad);
        CHECK_THROWS_MATCHES(load_corpus(path), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("unknown label scheme")));
    }
    SECTION("label out of range") {
        std::string bad = good;
        bad[bad.size() - 2] = 99;  // low byte of the final u16 label
        write_bytes(path, bad);
        CHECK_THROWS_MATCHES(load_corpus(path), DataError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("label out of range")));
    }
    std::remove(path.c_str());
}

TEST_CASE("per-capture seeds never collide within a corpus", "[dataset]") {
    const DatasetManifest m;
    std::set<std::uint64_t> seeds;
    int count = 0;
    for (int c = 0; c < 49; ++c)
        for (int k = 0; k < m.n_captures_per_class; ++k) {
            seeds.insert(m.offset_seed_for(c, k));
            seeds.insert(m.noise_seed_for(c, k));
            count += 2;
        }
    CHECK(static_cast<int>(seeds.size()) == count);
}

TEST_CASE("grouped-label corpus carries eight classes", "[dataset]") {
    auto m = tiny_manifest();
    m.scheme = LabelScheme::MultiGroup;
    m.n_captures_per_class = 3;
    const Corpus corpus = build_corpus(m);
    CHECK(corpus.n_classes == 8);
    CHECK(corpus.scheme == LabelScheme::MultiGroup);
    CHECK(corpus.n_samples() == static_cast<std::size_t>(8 * 3 * 8));
    for (int c = 0; c < 8; ++c) CHECK(corpus.display_labels[static_cast<std::size_t>(c)] == c + 1);
}
