//! The fixture library shipped in `fixtures/`, generated from code so the
//! files can be checked for drift.

use std::collections::BTreeMap;

use torclass_core::charpair::Attestations;
use torclass_core::faceposet::{shapes, FacePoset};

use crate::document::PairDocument;

fn pair(poset: &FacePoset, k: usize, labels: &[(&str, Vec<i64>)], attestations: Attestations) -> PairDocument {
    let mut doc = PairDocument::from_poset(poset);
    doc.k = Some(k);
    doc.lambda = labels.iter().map(|(id, v)| (id.to_string(), v.clone())).collect::<BTreeMap<_, _>>();
    doc.attestations = attestations;
    doc.normalized()
}

fn unit(k: usize, i: usize) -> Vec<i64> {
    (0..k).map(|j| i64::from(i == j)).collect()
}

/// Compact orbit spaces that are polytopes: every closed face is a ball and
/// there are no sections to worry about.
fn polytope_attestations(dim: usize) -> Attestations {
    Attestations { sections_exist: true, faces_contractible: true, four_faces_matched: dim < 4 }
}

/// `(file stem, document)` for every fixture.
pub fn library() -> Vec<(String, PairDocument)> {
    let mut out = Vec::new();
    for n in 1..=4 {
        let p = shapes::simplex(n);
        out.push((format!("simplex_{n}"), PairDocument::from_poset(&p).normalized()));
        // complex projective space: the standard basis and the all-ones vector
        let mut labels: Vec<(String, Vec<i64>)> = (0..n).map(|i| (format!("f{i}"), unit(n, i))).collect();
        labels.push((format!("f{n}"), vec![1; n]));
        let refs: Vec<(&str, Vec<i64>)> = labels.iter().map(|(id, v)| (id.as_str(), v.clone())).collect();
        let mut doc = pair(&p, n, &refs, polytope_attestations(n));
        if n == 4 {
            // the four-dimensional face is the whole simplex, matched with itself
            doc.attestations.four_faces_matched = true;
        }
        out.push((format!("cp_{n}"), doc));
    }
    for n in 2..=3 {
        let p = shapes::cube(n);
        out.push((format!("cube_{n}"), PairDocument::from_poset(&p).normalized()));
        let labels: Vec<(String, Vec<i64>)> = (0..2 * n).map(|f| (format!("f{f}"), unit(n, f / 2))).collect();
        let refs: Vec<(&str, Vec<i64>)> = labels.iter().map(|(id, v)| (id.as_str(), v.clone())).collect();
        out.push((format!("product_of_spheres_{n}"), pair(&p, n, &refs, polytope_attestations(n))));
    }
    let prism = shapes::product(&shapes::simplex(2), &shapes::simplex(1));
    out.push(("prism".into(), PairDocument::from_poset(&prism).normalized()));
    out.push((
        "prism_cp2_times_cp1".into(),
        pair(
            &prism,
            3,
            &[
                ("f0|P", vec![1, 0, 0]),
                ("f1|P", vec![0, 1, 0]),
                ("f2|P", vec![1, 1, 0]),
                ("P|f0", vec![0, 0, 1]),
                ("P|f1", vec![0, 0, 1]),
            ],
            polytope_attestations(3),
        ),
    ));
    // Hirzebruch surfaces: (1,0), (0,1), (-1,a), (0,-1) around the square,
    // which visits the facets in the order f0, f2, f1, f3
    let square = shapes::cube(2);
    for a in 0..=2 {
        out.push((
            format!("hirzebruch_{a}"),
            pair(
                &square,
                2,
                &[("f0", vec![1, 0]), ("f2", vec![0, 1]), ("f1", vec![1, -a]), ("f3", vec![0, 1])],
                polytope_attestations(2),
            ),
        ));
    }
    out.push((
        "square_det2_vertex".into(),
        pair(&square, 2, &[("f0", vec![1, 0]), ("f1", vec![1, 0]), ("f2", vec![0, 1]), ("f3", vec![1, 2])], Attestations::default()),
    ));
    out.push(("half_plane".into(), pair(&shapes::half_plane(), 2, &[("f0", vec![1, 0])], Attestations::default())));
    out
}
