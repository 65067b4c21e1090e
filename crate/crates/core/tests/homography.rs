use courtcal::calibrate::{dlt_homography, project, Correspondence, HomographyMatrix};
use courtcal::{Homography, Point2};
use proptest::prelude::*;

type M3 = [[f64; 3]; 3];

fn inv3(m: &M3) -> Option<M3> {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * c(1, 2, 1, 2) - m[0][1] * c(1, 2, 0, 2) + m[0][2] * c(1, 2, 0, 1);
    if det.abs() < 1e-12 {
        return None;
    }
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|r| r.map(|v| v / det)))
}

fn frob(m: &M3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Upper bound on the 2-norm condition number.
fn cond_f(m: &M3) -> f64 {
    inv3(m).map_or(f64::INFINITY, |i| frob(m) * frob(&i))
}

fn map(m: &M3, p: (f64, f64)) -> Option<(f64, f64)> {
    let w = m[2][0] * p.0 + m[2][1] * p.1 + m[2][2];
    (w.abs() > 1e-3).then(|| {
        (
            (m[0][0] * p.0 + m[0][1] * p.1 + m[0][2]) / w,
            (m[1][0] * p.0 + m[1][1] * p.1 + m[1][2]) / w,
        )
    })
}

fn area2(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs()
}

/// Four model points with no three close to collinear.
fn generic_quad() -> impl Strategy<Value = [(f64, f64); 4]> {
    prop::array::uniform4((-6.0f64..6.0, 0.0f64..12.0)).prop_filter("generic", |p| {
        [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
            .iter()
            .all(|&(i, j, k)| area2(p[i], p[j], p[k]) > 4.0)
    })
}

fn well_conditioned() -> impl Strategy<Value = M3> {
    prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0))
        .prop_map(|mut m| {
            m[0][0] += 2.0;
            m[1][1] += 2.0;
            m[2][2] += 2.0;
            m
        })
        .prop_filter("cond < 1e3", |m| cond_f(m) < 1e3)
}

fn to_points(p: &[(f64, f64)]) -> Vec<Point2<f64>> {
    p.iter().map(|&(x, y)| Point2::new(x, y)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn four_point_round_trip(m in well_conditioned(), quad in generic_quad()) {
        let image: Option<Vec<_>> = quad.iter().map(|&p| map(&m, p)).collect();
        let image = image.ok_or_else(|| TestCaseError::reject("point near infinity"))?;
        let h = dlt_homography(&Correspondence::new(to_points(&quad), to_points(&image))).unwrap();
        let truth = Homography::new(m).unwrap();
        prop_assert!(h.frobenius_distance(&truth) < 1e-9, "distance {}", h.frobenius_distance(&truth));
        for (q, i) in quad.iter().zip(&image) {
            let p = project(&h, &Point2::new(q.0, q.1)).unwrap();
            prop_assert!((p.x - i.0).hypot(p.y - i.1) < 1e-6);
        }
    }

    #[test]
    fn overdetermined_exact_data_recovers(m in well_conditioned(), quad in generic_quad(), extra in prop::collection::vec((-6.0f64..6.0, 0.0f64..12.0), 1..12)) {
        let model: Vec<_> = quad.iter().copied().chain(extra).collect();
        let image: Option<Vec<_>> = model.iter().map(|&p| map(&m, p)).collect();
        let image = image.ok_or_else(|| TestCaseError::reject("point near infinity"))?;
        let h = dlt_homography(&Correspondence::new(to_points(&model), to_points(&image))).unwrap();
        prop_assert!(h.frobenius_distance(&Homography::new(m).unwrap()) < 1e-8);
    }

    #[test]
    fn projection_is_scale_invariant(m in well_conditioned(), lambda in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let scaled = m.map(|r| r.map(|v| v * lambda));
        let (a, b) = (Homography::new(m).unwrap(), Homography::new(scaled).unwrap());
        prop_assert!(a.frobenius_distance(&b) < 1e-12);
        let p = Point2::new(x, y);
        match (project(&a, &p), project(&b, &p)) {
            (Some(u), Some(v)) => prop_assert!((u.x - v.x).hypot(u.y - v.y) < 1e-6 * (1.0 + u.x.hypot(u.y))),
            (None, None) => {}
            _ => {
                // |w| sits on the 1e-9 cutoff in one scaling only
                prop_assert!(a.w(&p).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn inverse_undoes_projection(m in well_conditioned(), x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let h = Homography::new(m).unwrap();
        let p = Point2::new(x, y);
        prop_assume!(h.w(&p).abs() > 1e-3);
        let q = h.project(&p).unwrap();
        let back = h.inverse().unwrap().project(&q).unwrap();
        prop_assert!((back.x - x).hypot(back.y - y) < 1e-6);
    }

    #[test]
    fn translation_composes_in_image_plane(m in well_conditioned(), dx in -500.0f64..500.0, dy in -500.0f64..500.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let h = Homography::new(m).unwrap();
        let p = Point2::new(x, y);
        prop_assume!(h.w(&p).abs() > 1e-3);
        let a = h.project(&p).unwrap();
        let b = h.translated(dx, dy).project(&p).unwrap();
        prop_assert!((b.x - a.x - dx).abs() < 1e-6 && (b.y - a.y - dy).abs() < 1e-6);
    }

    #[test]
    fn f32_four_point_fit_is_close(m in well_conditioned(), quad in generic_quad()) {
        let image: Option<Vec<_>> = quad.iter().map(|&p| map(&m, p)).collect();
        let image = image.ok_or_else(|| TestCaseError::reject("point near infinity"))?;
        let cast = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| Point2::new(x as f32, y as f32)).collect::<Vec<_>>();
        let h: HomographyMatrix<f32> = dlt_homography(&Correspondence::new(cast(&quad), cast(&image))).unwrap();
        let truth = Homography::new(m).unwrap();
        prop_assert!((h.cast::<f64>().frobenius_distance(&truth)) < 1e-2);
    }
}
