#include <catch2/catch_amalgamated.hpp>

#include "lrgas/substitution.hpp"
#include "lrgas/tower.hpp"
#include "lrgas/voronoi.hpp"

using namespace lrgas;

namespace {
std::shared_ptr<const DeloneMultiset> chair7() {
    static auto m = std::make_shared<const DeloneMultiset>(generate_patch(chair_rule(), 7, 0));
    return m;
}
const TowerSystem& chair_tower() {
    static TowerSystem tw = build_substitution_tower(chair_rule(), chair7(), 3);
    return tw;
}
} // namespace

TEST_CASE("tower constants are exact rationals") {
    TowerConstants t = tower_constants(Rational(2));
    REQUIRE(t.lambda == Rational(108));
    REQUIRE(t.K1 == Rational(95, 642));
    REQUIRE(t.K2 == Rational(216, 107));

    TowerConstants u = tower_constants(Rational(3, 2));
    REQUIRE(u.lambda == Rational(225, 4));  // 6 * 1.5 * 2.5^2
    REQUIRE(u.K1.value() == Catch::Approx(0.2 - 1.5 / 55.25));
    REQUIRE(u.K2.value() == Catch::Approx(56.25 * 1.5 / 55.25));

    for (double L : {1.1, 1.5, 2.0, 5.0}) {
        TowerConstants c = tower_constants(L);
        REQUIRE(Rational(0) < c.K1);
        REQUIRE(c.K1 < Rational(1));
        REQUIRE(Rational(1) < c.K2);
    }
    REQUIRE_THROWS_AS(tower_constants(Rational(1)), std::domain_error);
    REQUIRE_THROWS_AS(tower_constants(Rational(1, 2)), std::domain_error);
}

TEST_CASE("periodic control tower: one box type, transition number 4") {
    auto sq = std::make_shared<const DeloneMultiset>(generate_patch(square_rule(), 6, 0));
    TowerSystem tw = build_substitution_tower(square_rule(), sq, 1);
    REQUIRE(tw.levels[0].k() == 1);
    REQUIRE(tw.levels[1].k() == 1);
    REQUIRE(tw.matrices.size() == 1);
    REQUIRE(tw.matrices[0].m == std::vector<std::vector<long>>{{4}});

    auto br = branching_report(tw);
    REQUIRE_FALSE(br.holds_at_depth);
    REQUIRE(br.first_violation == 0);
}

TEST_CASE("chair tower: four box types and the rotation-circulant matrix") {
    const TowerSystem& tw = chair_tower();
    std::vector<std::vector<long>> expected{
        {2, 1, 0, 1}, {1, 2, 1, 0}, {0, 1, 2, 1}, {1, 0, 1, 2}};
    for (int n = 0; n <= 3; ++n) REQUIRE(tw.levels[n].k() == 4);
    for (const auto& tm : tw.matrices) {
        REQUIRE(tm.m == expected);
        for (int i = 0; i < 4; ++i) {
            REQUIRE(tm.row_sum(i) == 4);  // area ratio of the inflation
            for (int j = 0; j < 4; ++j)
                REQUIRE(tm.offsets[i][j].size() == static_cast<std::size_t>(tm.m[i][j]));
        }
    }
    // cube of the matrix is entrywise positive (primitivity surrogate)
    auto M = expected;
    auto mul = [](const auto& A, const auto& B) {
        std::vector<std::vector<long>> C(4, std::vector<long>(4, 0));
        for (int i = 0; i < 4; ++i)
            for (int l = 0; l < 4; ++l)
                for (int j = 0; j < 4; ++j) C[i][j] += A[i][l] * B[l][j];
        return C;
    };
    auto M3 = mul(mul(M, M), M);
    for (auto& row : M3)
        for (long v : row) REQUIRE(v >= 1);

    auto br = branching_report(chair_tower());
    REQUIRE(br.holds_at_depth);

    TowerSystem empty;
    REQUIRE_THROWS_AS(branching_report(empty), error);
}

TEST_CASE("transition matrices conserve volume") {
    const TowerSystem& tw = chair_tower();
    for (std::size_t n = 1; n < tw.levels.size(); ++n) {
        const auto& tm = tw.matrices[n - 1];
        for (int i = 0; i < tw.levels[n].k(); ++i) {
            double vol = tw.levels[n].boxes[i].domain.area();
            double sum = 0;
            for (int j = 0; j < tw.levels[n - 1].k(); ++j)
                sum += static_cast<double>(tm.m[i][j]) *
                       tw.levels[n - 1].boxes[j].domain.area();
            REQUIRE(std::abs(sum - vol) <= 1e-9 * vol);
        }
    }
}

TEST_CASE("pattern matcher agrees with the generator hierarchy") {
    const TowerSystem& tw = chair_tower();
    const auto& m = *chair7();
    for (int n = 1; n <= 2; ++n)
        for (int i = 0; i < 4; ++i) {
            auto rv = return_vectors(m, tw.levels[n].boxes[i].base);
            REQUIRE(rv.positions.size() == tw.levels[n].boxes[i].occurrences.size());
            detail::PosSet derived;
            for (const auto& p : tw.levels[n].boxes[i].occurrences) derived.insert(p);
            for (const auto& p : rv.positions) REQUIRE(derived.contains(p));
        }
}

TEST_CASE("return vectors of the unit lattice") {
    auto sq = generate_patch(square_rule(), 6, 0);
    int origin = sq.point_at(v2(0, 0), 1e-9);
    LocalTransversal C = cylinder_transversal(sq, origin, 1.2);
    auto rv = return_vectors(sq, C);
    REQUIRE(rv.packing_radius == Catch::Approx(0.5));  // the lattice itself
    REQUIRE_FALSE(rv.empty_warning);
    // every returned vector re-verifies against the matcher
    for (const auto& p : rv.positions) REQUIRE(C.matches(sq, p));
}

TEST_CASE("return-vector separation against the level inradius") {
    const TowerSystem& tw = chair_tower();
    const auto& m = *chair7();
    for (int n = 1; n <= 2; ++n)
        for (int i = 0; i < 4; ++i) {
            auto rv = return_vectors(m, tw.levels[n].boxes[i].base);
            double bound = tw.levels[n].r_int - 2.0 * m.covering_radius;
            REQUIRE(rv.packing_radius >= bound);  // window analog of the paper gap
        }
}

TEST_CASE("zoomed-out checks pass for consecutive chair levels") {
    const TowerSystem& tw = chair_tower();
    for (int n = 0; n + 1 <= 2; ++n) {
        ZoomReport rep = check_zoomed_out(tw.levels[n + 1], tw.levels[n], *chair7());
        INFO("levels (" << n << ", " << n + 1 << ") " << rep.p1.witness << rep.p2.witness
                        << rep.p3.witness << rep.p4.witness << rep.p5.witness
                        << rep.eq7.witness);
        REQUIRE(rep.p1.pass);
        REQUIRE(rep.p2.pass);
        REQUIRE(rep.p3.pass);
        REQUIRE(rep.p4.pass);
        REQUIRE(rep.p5.pass);
        REQUIRE(rep.eq7.pass);
    }
}

namespace {
/// Hand-built periodic decompositions for the counterexamples.
BoxDecomposition lattice_cells(const DeloneMultiset& m, double size, Vec2 shift,
                               double rec) {
    // cells anchored at their lower-left corner, placed on exact multiples
    BoxDecomposition dec;
    dec.level = 0;
    BoxType bt;
    bt.level = 0;
    bt.domain.v = {v2(0, 0), v2(size, 0), v2(size, size), v2(0, size)};
    bt.base.name = "cell";
    bt.base.anchor_label = 0;
    bt.base.rec = rec;
    bt.base.defining_radius = rec;
    double W = m.window_radius;
    int n = static_cast<int>(W / size) + 1;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            Vec2 p = v2(i * size, j * size) + shift;
            if (norm(p) + rec + size < W) bt.occurrences.push_back(p);
        }
    dec.boxes.push_back(bt);
    dec.refresh_radii();
    return dec;
}
} // namespace

TEST_CASE("misaligned cells fail the partition property with a witness") {
    auto sq = generate_patch(square_rule(), 6, 0);
    BoxDecomposition fine = lattice_cells(sq, 1.0, v2(0, 0), 1.0);
    BoxDecomposition coarse = lattice_cells(sq, 2.0, v2(0.5, 0.5), 2.0);
    ZoomReport rep = check_zoomed_out(coarse, fine, sq);
    REQUIRE_FALSE(rep.p4.pass);
    REQUIRE_FALSE(rep.p4.witness.empty());
}

TEST_CASE("a decomposition is not zoomed out of itself") {
    auto sq = generate_patch(square_rule(), 6, 0);
    BoxDecomposition cells = lattice_cells(sq, 2.0, v2(0, 0), 2.0);
    ZoomReport rep = check_zoomed_out(cells, cells, sq);
    REQUIRE_FALSE(rep.p3.pass);  // boundaries coincide: no proper refinement
}

TEST_CASE("scaling constants measured at level one hold at depth") {
    auto patch = chair7();
    TowerSystem tw = build_substitution_tower(chair_rule(), patch, 4);
    double lam = tw.lambda_eff;
    for (int n = 0; n <= 4; ++n) {
        double scale = std::pow(lam, n);
        REQUIRE(tw.K1_hat * scale <= tw.levels[n].r_int + 1e-9);
        REQUIRE(tw.levels[n].r_int < tw.levels[n].R_ext);
        REQUIRE(tw.levels[n].R_ext <= tw.K2_hat * scale + 1e-9);
        REQUIRE(tw.levels[n].rec <= tw.Crec_hat * scale + 1e-9);
    }
}

TEST_CASE("box measures: lattice control is exact, chair levels balance") {
    auto sq = std::make_shared<const DeloneMultiset>(generate_patch(square_rule(), 7, 0));
    TowerSystem tws = build_substitution_tower(square_rule(), sq, 2);
    auto tabs = box_measures(tws, *sq);
    for (double s : tabs.level_sums) REQUIRE(s == Catch::Approx(1.0).margin(0.01));

    auto tabc = box_measures(chair_tower(), *chair7());
    // the orientation mix inside a level-7 window still carries the
    // subdominant-eigenvalue bias (~(1/2)^(7-n)), so deeper levels get a
    // looser band here; the acceptance suite tightens this on a deep patch
    for (std::size_t n = 0; n < tabc.level_sums.size(); ++n) {
        double tol = n <= 2 ? 0.05 : 0.12;
        REQUIRE(tabc.level_sums[n] == Catch::Approx(1.0).margin(tol));
    }
    // two-sided frequency scaling: nu * lambda^(2n) stays in a narrow band
    double lo = 1e18, hi = 0;
    for (const auto& row : tabc.rows) {
        if (row.level < 1) continue;
        double v = row.nu * std::pow(4.0, row.level);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(hi / lo <= 10.0);
}

TEST_CASE("insufficient patches are rejected") {
    auto small = std::make_shared<const DeloneMultiset>(generate_patch(chair_rule(), 3, 0));
    REQUIRE_THROWS_AS(build_substitution_tower(chair_rule(), small, 3),
                      insufficient_patch_error);
    auto tri = std::make_shared<const DeloneMultiset>(triangular_patch(1.0, 40.0));
    REQUIRE_THROWS_AS(build_substitution_tower(chair_rule(), tri, 1),
                      insufficient_patch_error);
}

TEST_CASE("voronoi decomposition of the unit lattice") {
    auto sq = generate_patch(square_rule(), 6, 0);
    BoxDecomposition dec = voronoi_decomposition(sq);
    REQUIRE(dec.k() == 1);  // all cells congruent unit squares
    REQUIRE(dec.boxes[0].domain.area() == Catch::Approx(1.0));
    REQUIRE(dec.r_int == Catch::Approx(0.5));
}

TEST_CASE("voronoi refinement of lattice returns") {
    auto sq = generate_patch(square_rule(), 6, 0);
    int origin = sq.point_at(v2(0, 0), 1e-9);
    LocalTransversal C = cylinder_transversal(sq, origin, 1.2);
    auto res = voronoi_tower_refine(sq, C);
    REQUIRE(res.decomposition.k() == 1);
    REQUIRE(res.decomposition.boxes[0].domain.area() == Catch::Approx(1.0));
}

TEST_CASE("voronoi refinement of a chair transversal nests over the cell level") {
    const auto& m = *chair7();
    const TowerSystem& tw = chair_tower();
    auto res = voronoi_tower_refine(m, tw.levels[1].boxes[0].base);
    REQUIRE(res.decomposition.k() >= 1);
    BoxDecomposition fine = voronoi_decomposition(m);
    ZoomReport rep = check_zoomed_out(res.decomposition, fine, m);
    INFO(rep.p1.witness << rep.p4.witness << rep.p5.witness);
    REQUIRE(rep.p1.pass);
    REQUIRE(rep.p4.pass);
    REQUIRE(rep.p5.pass);
    // the snapped construction reports the boundary-sensitive properties too
    // but they are informational for this route
    // every refined cell covers its members with disjoint interiors by
    // construction; the area identity is exact
    for (const auto& b : res.decomposition.boxes) {
        for (std::size_t o = 0; o < b.occurrences.size(); ++o)
            REQUIRE(b.member_points[o].size() ==
                    b.member_points.front().size());
    }
}

TEST_CASE("voronoi refinement needs enough returns") {
    auto sq = generate_patch(square_rule(), 4, 0);
    int origin = sq.point_at(v2(0, 0), 1e-9);
    // a transversal certifiable almost nowhere yields too few returns
    LocalTransversal C = cylinder_transversal(sq, origin, 1.2);
    C.rec = sq.window_radius * 0.95;
    C.defining_radius = C.rec;
    REQUIRE_THROWS_AS(voronoi_tower_refine(sq, C), error);
}
