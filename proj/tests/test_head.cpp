#include <doctest.h>

#include <random>

#include "mms/head.hpp"
#include "oracles.hpp"

using namespace mms;

namespace {

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> g(0, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

AttentionParams random_attention(std::mt19937_64& rng, Eigen::Index L, Eigen::Index S) {
    AttentionParams p;
    p.w_vec = random_mat(rng, L, 1);
    p.V = random_mat(rng, L, S, 0.3);
    p.U = random_mat(rng, L, S, 0.3);
    return p;
}

}  // namespace

TEST_CASE("fuse_scores") {
    TargetPlanes c;
    c.malignant = ScorePlane::Constant(2, 3, 0.8);
    c.benign = ScorePlane::Constant(2, 3, 0.4);

    auto all_ones = fuse_scores(c, ScorePlane::Constant(2, 3, 1.0));
    CHECK((all_ones.malignant == c.malignant).all());
    CHECK((all_ones.benign == c.benign).all());

    auto halved = fuse_scores(c, ScorePlane::Constant(2, 3, 0.5));
    CHECK(halved.malignant(0, 0) == doctest::Approx(0.4));
    CHECK(halved.benign(1, 2) == doctest::Approx(0.2));

    CHECK_THROWS(fuse_scores(c, ScorePlane::Constant(3, 2, 1.0)));
}

TEST_CASE("fuse_scores bounded by both inputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0, 1);
    TargetPlanes c;
    c.malignant = ScorePlane(4, 5);
    c.benign = ScorePlane(4, 5);
    ScorePlane o(4, 5);
    for (int r = 0; r < 4; ++r)
        for (int col = 0; col < 5; ++col) {
            c.malignant(r, col) = unit(rng);
            c.benign(r, col) = unit(rng);
            o(r, col) = unit(rng);
        }
    auto f = fuse_scores(c, o);
    CHECK((f.malignant <= c.malignant + 1e-15).all());
    CHECK((f.malignant <= o + 1e-15).all());
    CHECK((f.malignant >= 0).all());
    CHECK((f.benign <= 1).all());
}

namespace {

ScoreGrid grid_from_scores(const std::vector<double>& malignant, int h, int w) {
    ScoreGrid g;
    g.h = h;
    g.w = w;
    for (int cell = 0; cell < h * w; ++cell) {
        DetBox b;
        const int r = cell / w, c = cell % w;
        b.geom = {c * 100.0 + 50, r * 100.0 + 50, 30, 30};
        b.score_malignant = malignant[static_cast<std::size_t>(cell)];
        b.score_benign = 0.1;
        b.source_anchor = GridIndex{r, c};
        g.boxes.push_back(b);
    }
    return g;
}

FeatureGrid features_for(int h, int w, Eigen::Index dim, std::mt19937_64& rng) {
    FeatureGrid f;
    f.h = h;
    f.w = w;
    f.values = random_mat(rng, static_cast<Eigen::Index>(h) * w, dim);
    return f;
}

}  // namespace

TEST_CASE("topk_select gathers the dominant cell") {
    std::mt19937_64 rng(4);
    ScoreGrid g = grid_from_scores({0.1, 0.9, 0.2, 0.15}, 2, 2);
    FeatureGrid f = features_for(2, 2, 8, rng);
    auto sel = topk_select(g, f, 1, 0.3, false);
    REQUIRE(sel.boxes.size() == 1);
    CHECK(sel.boxes[0].score_malignant == 0.9);
    CHECK(sel.features.rows() == 1);
    CHECK((sel.features.row(0) - f.values.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(sel.truncated);
}

TEST_CASE("topk_select reports truncation when survivors run out") {
    std::mt19937_64 rng(5);
    // All boxes stacked on one location: one survivor after NMS.
    ScoreGrid g = grid_from_scores({0.5, 0.6, 0.7, 0.8}, 2, 2);
    for (auto& b : g.boxes) b.geom = {50, 50, 30, 30};
    FeatureGrid f = features_for(2, 2, 4, rng);
    auto sel = topk_select(g, f, 3, 0.3, false);
    CHECK(sel.boxes.size() == 1);
    CHECK(sel.truncated);
}

TEST_CASE("topk_select global pooling of a constant grid returns the constant") {
    std::mt19937_64 rng(6);
    ScoreGrid g = grid_from_scores({0.3, 0.4, 0.5, 0.6}, 2, 2);
    FeatureGrid f;
    f.h = 2;
    f.w = 2;
    f.values = Mat::Constant(4, 5, 1.25);
    auto sel = topk_select(g, f, 2, 0.3, true);
    REQUIRE(sel.features.rows() == 4);  // 2 boxes + max pool + mean pool
    CHECK((sel.features.row(2).array() == 1.25).all());
    CHECK((sel.features.row(3).array() == 1.25).all());
}

TEST_CASE("topk_select matches a sort+nms reference on random instances") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(9);
        for (auto& s : scores) s = unit(rng);
        ScoreGrid g = grid_from_scores(scores, 3, 3);
        FeatureGrid f = features_for(3, 3, 6, rng);
        auto sel = topk_select(g, f, 4, 0.3, false);

        auto survivors = oracle::reference_nms(g.boxes, Target::Malignant, 0.3);
        const std::size_t expect = std::min<std::size_t>(4, survivors.size());
        REQUIRE(sel.boxes.size() == expect);
        for (std::size_t i = 0; i < expect; ++i)
            CHECK(sel.boxes[i].score_malignant == survivors[i].score_malignant);
    }
}

TEST_CASE("gated_attention singleton and symmetry") {
    std::mt19937_64 rng(8);
    AttentionParams p = random_attention(rng, 6, 10);
    Mat q1 = random_mat(rng, 1, 10);
    Vec a1 = gated_attention(q1, p);
    REQUIRE(a1.size() == 1);
    CHECK(a1(0) == doctest::Approx(1.0));

    Mat q2(2, 10);
    q2.row(0) = q1.row(0);
    q2.row(1) = q1.row(0);
    Vec a2 = gated_attention(q2, p);
    CHECK(a2(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a2(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gated_attention matches the straight-line transcription") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index L = 5, S = 7, K = 1 + trial % 6;
        AttentionParams p = random_attention(rng, L, S);
        Mat q = random_mat(rng, K, S);

        std::vector<std::vector<double>> qv(K, std::vector<double>(S));
        std::vector<std::vector<double>> Vv(L, std::vector<double>(S)), Uv(L, std::vector<double>(S));
        std::vector<double> wv(L);
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index s = 0; s < S; ++s) qv[k][s] = q(k, s);
        for (Eigen::Index l = 0; l < L; ++l) {
            wv[l] = p.w_vec(l);
            for (Eigen::Index s = 0; s < S; ++s) {
                Vv[l][s] = p.V(l, s);
                Uv[l][s] = p.U(l, s);
            }
        }
        const auto want = oracle::attention_by_hand(qv, wv, Vv, Uv);
        const Vec got = gated_attention(q, p);
        double sum = 0;
        for (Eigen::Index k = 0; k < K; ++k) {
            CHECK(got(k) == doctest::Approx(want[static_cast<std::size_t>(k)]).epsilon(1e-12));
            CHECK(got(k) >= 0.0);
            sum += got(k);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("gated_attention permutation equivariance") {
    std::mt19937_64 rng(10);
    AttentionParams p = random_attention(rng, 6, 9);
    Mat q = random_mat(rng, 5, 9);
    Vec a = gated_attention(q, p);

    std::vector<Eigen::Index> perm = {3, 0, 4, 1, 2};
    Mat qp(5, 9);
    for (Eigen::Index i = 0; i < 5; ++i) qp.row(i) = q.row(perm[static_cast<std::size_t>(i)]);
    Vec ap = gated_attention(qp, p);
    for (Eigen::Index i = 0; i < 5; ++i)
        CHECK(ap(i) == doctest::Approx(a(perm[static_cast<std::size_t>(i)])).epsilon(1e-12));
}

TEST_CASE("image_prediction basics") {
    std::mt19937_64 rng(11);
    Mat q = random_mat(rng, 3, 6);
    HeadParams zero{Mat::Zero(6, 2)};
    Vec alpha = Vec::Constant(3, 1.0 / 3.0);
    auto pred = image_prediction(q, alpha, zero);
    CHECK(pred.y_malignant == doctest::Approx(0.5));
    CHECK(pred.y_benign == doctest::Approx(0.5));

    // One-hot attention selects that feature vector.
    HeadParams head{random_mat(rng, 6, 2)};
    Vec onehot = Vec::Zero(3);
    onehot(1) = 1.0;
    auto picked = image_prediction(q, onehot, head);
    const Vec z = q.row(1).transpose();
    const Vec logits = head.w_image.transpose() * z;
    CHECK(picked.y_malignant == doctest::Approx(1 / (1 + std::exp(-logits(0)))).epsilon(1e-12));
    CHECK(picked.y_benign == doctest::Approx(1 / (1 + std::exp(-logits(1)))).epsilon(1e-12));

    Vec bad = Vec::Constant(3, 0.4);
    CHECK_THROWS(image_prediction(q, bad, head));
}

TEST_CASE("image_prediction invariant under joint permutation") {
    std::mt19937_64 rng(12);
    Mat q = random_mat(rng, 4, 5);
    HeadParams head{random_mat(rng, 5, 2)};
    Vec alpha(4);
    alpha << 0.1, 0.2, 0.3, 0.4;
    auto base = image_prediction(q, alpha, head);

    std::vector<Eigen::Index> perm = {2, 0, 3, 1};
    Mat qp(4, 5);
    Vec ap(4);
    for (Eigen::Index i = 0; i < 4; ++i) {
        qp.row(i) = q.row(perm[static_cast<std::size_t>(i)]);
        ap(i) = alpha(perm[static_cast<std::size_t>(i)]);
    }
    auto permuted = image_prediction(qp, ap, head);
    CHECK(permuted.y_malignant == doctest::Approx(base.y_malignant).epsilon(1e-12));
    CHECK(permuted.y_benign == doctest::Approx(base.y_benign).epsilon(1e-12));
}

namespace {

SliceStack stack_with_salient_slice(std::mt19937_64& rng, int n_slices, int salient,
                                    int h, int w) {
    std::uniform_real_distribution<double> unit(0.4, 0.95);
    SliceStack stack;
    stack.grids.resize(static_cast<std::size_t>(n_slices));
    for (int s = 0; s < n_slices; ++s) {
        auto& g = stack.grids[static_cast<std::size_t>(s)];
        g.h = h;
        g.w = w;
        for (int cell = 0; cell < h * w; ++cell) {
            DetBox b;
            const int r = cell / w, c = cell % w;
            b.geom = {c * 80.0 + 40, r * 80.0 + 40, 30, 30};
            b.score_malignant = s == salient ? unit(rng) : 0.0;
            b.score_benign = 0.0;
            b.slice = s;
            b.source_anchor = GridIndex{r, c};
            stack.grids[static_cast<std::size_t>(s)].boxes.push_back(b);
        }
    }
    return stack;
}

}  // namespace

TEST_CASE("dbt_image_prediction: salient slice equals the 2D pipeline on it") {
    std::mt19937_64 rng(13);
    const int h = 2, w = 3, S = 8;
    const int salient = 4;
    SliceStack stack = stack_with_salient_slice(rng, 7, salient, h, w);
    std::vector<FeatureGrid> feats;
    for (int s = 0; s < 7; ++s) feats.push_back(features_for(h, w, S, rng));

    AttentionParams attn = random_attention(rng, 5, S);
    HeadParams head{random_mat(rng, S, 2)};

    auto full = dbt_image_prediction(stack, feats, 3, 0.3, attn, head);

    // 2D pipeline on the salient slice alone.
    auto sel = topk_select(stack.grids[salient], feats[salient], 3, 0.3, false);
    auto alpha = gated_attention(sel.features, attn);
    auto flat = image_prediction(sel.features, alpha, head);

    CHECK(full.y_malignant == doctest::Approx(flat.y_malignant).epsilon(1e-12));
    CHECK(full.y_benign == doctest::Approx(flat.y_benign).epsilon(1e-12));

    // Single-slice stack likewise.
    SliceStack single;
    single.grids = {stack.grids[salient]};
    auto one = dbt_image_prediction(single, {feats[salient]}, 3, 0.3, attn, head);
    CHECK(one.y_malignant == doctest::Approx(flat.y_malignant).epsilon(1e-12));
}

TEST_CASE("compose_loss indicator truth table") {
    ImagePrediction y_hat{0.8, 0.3};
    // Positive image without boxes: detection skipped.
    auto skipped = compose_loss({}, y_hat, 1, 0, 0.8, 0);
    CHECK_FALSE(skipped.detection_term.has_value());
    CHECK(skipped.total == doctest::Approx(skipped.bce_term + skipped.consistency_term));

    // Negative image without boxes: detection included.
    auto negative = compose_loss(1.5, y_hat, 0, 0, 0.8, 0);
    REQUIRE(negative.detection_term.has_value());
    CHECK(*negative.detection_term == 1.5);
    CHECK(negative.total ==
          doctest::Approx(1.5 + negative.bce_term + negative.consistency_term));

    // Exhaustive over S in {0,1,2} and labels in {0,1}^2.
    for (long s : {0L, 1L, 2L})
        for (int ym : {0, 1})
            for (int yb : {0, 1}) {
                const bool expect_detection = (s != 0) || (ym + yb < 1);
                auto out = compose_loss(0.7, y_hat, ym, yb, 0.5, s);
                CHECK(out.detection_term.has_value() == expect_detection);
            }

    // Consistency zero iff prediction equals the top-1 score.
    auto consistent = compose_loss(0.1, y_hat, 0, 0, 0.8, 0);
    CHECK(consistent.consistency_term == 0.0);
    auto off = compose_loss(0.1, y_hat, 0, 0, 0.6, 0);
    CHECK(off.consistency_term == doctest::Approx(10 * 0.2));

    CHECK_THROWS(compose_loss(0.1, y_hat, 2, 0, 0.5, 0));
    // Included detection term requires a supplied loss value.
    CHECK_THROWS(compose_loss({}, y_hat, 0, 0, 0.5, 0));
}

TEST_CASE("compose_loss BCE saturation stays finite") {
    ImagePrediction saturated{1.0, 0.0};
    auto out = compose_loss(0.0, saturated, 0, 1, 1.0, 0);
    CHECK(std::isfinite(out.bce_term));
    CHECK(out.bce_term > 10);  // two fully-wrong targets at the 1e-7 clamp
}

TEST_CASE("pseudo_labels") {
    std::vector<DetBox> boxes;
    DetBox a;
    a.geom = {10, 10, 5, 5};
    a.score_malignant = 0.9;
    a.score_benign = 0.2;
    DetBox b;
    b.geom = {30, 30, 5, 5};
    b.score_malignant = 0.4;
    b.score_benign = 0.8;
    boxes = {a, b};

    auto malignant_only = pseudo_labels(boxes, 1, 0);
    REQUIRE(malignant_only.boxes.size() == 1);
    CHECK(malignant_only.boxes[0].score_malignant == 0.9);

    auto both = pseudo_labels(boxes, 1, 1);
    REQUIRE(both.boxes.size() == 2);
    CHECK(both.boxes[0].score_malignant == 0.9);
    CHECK(both.boxes[1].score_benign == 0.8);

    CHECK(pseudo_labels(boxes, 0, 0).boxes.empty());

    auto missing = pseudo_labels({}, 1, 0);
    CHECK(missing.boxes.empty());
    CHECK(missing.warnings.size() == 1);
}

TEST_CASE("training_slice_policy") {
    std::mt19937_64 rng(19);

    // Validation, negative, 71 slices: the central slice.
    auto center = training_slice_policy(71, {}, false, Phase::Validate, rng);
    CHECK_FALSE(center.cview_fallback);
    CHECK(center.slice == 35);

    // Train with annotated slices 10..14: uniform over the set.
    std::vector<int> counts(15, 0);
    for (int i = 0; i < 1000; ++i) {
        auto pick = training_slice_policy(70, {{10, 11, 12, 13, 14}}, true, Phase::Train, rng);
        REQUIRE_FALSE(pick.cview_fallback);
        REQUIRE(pick.slice >= 10);
        REQUIRE(pick.slice <= 14);
        counts[static_cast<std::size_t>(pick.slice)]++;
    }
    for (int s = 10; s <= 14; ++s) CHECK(counts[static_cast<std::size_t>(s)] > 120);

    // Positive without annotations: C-View fallback in both phases.
    CHECK(training_slice_policy(70, {}, true, Phase::Train, rng).cview_fallback);
    CHECK(training_slice_policy(70, {}, true, Phase::Validate, rng).cview_fallback);

    // Validation with an annotated lesion: its center slice.
    auto lesion_center = training_slice_policy(70, {{20, 22, 24}}, true, Phase::Validate, rng);
    CHECK(lesion_center.slice == 22);

    // Negative training draw stays in range.
    for (int i = 0; i < 100; ++i) {
        auto pick = training_slice_policy(70, {}, false, Phase::Train, rng);
        CHECK(pick.slice >= 0);
        CHECK(pick.slice < 70);
    }
}
