//! Frozen reference values through the public API.

use approx::assert_relative_eq;
use polyaniso::data::ReferenceMaterial;
use polyaniso::invariants::{general_invariants, polyconvex_invariants};
use polyaniso::kinematics::{axis_rotation, bundle, cofactor, tensor_cross};
use polyaniso::material::{Hyperelastic, ShearCoupling};
use polyaniso::network::{forward, input_gradient, input_hessian, param_gradient_of_input_gradient, Layer};
use polyaniso::pann::{growth, ModelOptions};
use polyaniso::relations::{poly_from_general, verify_roundtrip};
use polyaniso::symmetry::{act_on_c, group_elements, structural_tensors, verify_group_axioms};
use polyaniso::{ArchitectureSpec, ConstraintMode, GroupId, NetworkParams, PannModel, PreferredFrame, Tensor2, Variant, Vec3};

fn diag(a: f64, b: f64, c: f64) -> Tensor2 {
    Tensor2::from_diagonal(&Vec3::new(a, b, c))
}

fn shear() -> Tensor2 {
    let mut f = Tensor2::identity();
    f[(0, 1)] = 0.2;
    f
}

#[test]
fn kinematics() {
    let mut expected = Tensor2::identity();
    expected[(1, 0)] = -0.2;
    assert_relative_eq!(cofactor(&shear()), expected, epsilon = 1e-15);

    let kb = bundle(&diag(1.1, 0.9, 1.0)).unwrap();
    assert_relative_eq!(kb.j, 0.99, epsilon = 1e-15);
    assert_relative_eq!(kb.c, diag(1.21, 0.81, 1.0), epsilon = 1e-15);
    assert_relative_eq!(kb.g, diag(0.81, 1.21, 0.9801), epsilon = 1e-15);

    let id = Tensor2::identity();
    assert_relative_eq!(tensor_cross(&id, &id), id * 2.0, epsilon = 1e-15);
    let f = diag(1.1, 0.9, 1.0);
    assert_relative_eq!(tensor_cross(&f, &f) * 0.5, diag(0.9, 1.1, 0.99), epsilon = 1e-15);
}

#[test]
fn symmetry_groups() {
    let std = PreferredFrame::standard();
    let cub = group_elements(GroupId::Cub, &std).unwrap();
    assert_eq!(cub.elements.len(), 24);
    assert!(cub.elements.iter().all(|q| q.iter().all(|v| [-1.0, 0.0, 1.0].contains(v))));
    assert!(verify_group_axioms(&cub).pass);
    let tet = group_elements(GroupId::Tet, &std).unwrap();
    assert_eq!(tet.elements.len(), 8);
    assert!(verify_group_axioms(&tet).pass);

    let ti = structural_tensors(GroupId::Ti, &std, false).unwrap();
    assert_eq!(ti.second, vec![diag(0.0, 0.0, 1.0)]);
    let m = structural_tensors(GroupId::Cub, &std, false).unwrap().fourth.unwrap();
    assert_relative_eq!(m.contract(&Tensor2::identity()), Tensor2::identity(), epsilon = 1e-15);

    let q = axis_rotation(&Vec3::z(), std::f64::consts::FRAC_PI_2);
    assert_relative_eq!(act_on_c(&q, &diag(1.0, 2.0, 3.0)).unwrap(), diag(2.0, 1.0, 3.0), epsilon = 1e-14);
}

#[test]
fn invariant_values() {
    let std = PreferredFrame::standard();
    let id = Tensor2::identity();
    let j = general_invariants(GroupId::Cub, &id, &std).unwrap();
    assert_relative_eq!(j.values.as_slice(), [3.0; 9].as_slice(), epsilon = 1e-14);

    let c = diag(1.21, 0.81, 1.0);
    let iso = general_invariants(GroupId::Iso, &c, &std).unwrap();
    assert_relative_eq!(iso.values[1], 3.1202, epsilon = 1e-13);
    assert_relative_eq!(poly_from_general(GroupId::Iso, &iso).unwrap().values[1], 3.0001, epsilon = 1e-13);

    let kb = bundle(&id).unwrap();
    let pc = polyconvex_invariants(GroupId::Cub, &kb, &std);
    assert_relative_eq!(pc.values.as_slice(), [3.0, 3.0, 1.0, -1.0, 3.0, 3.0, 12.0, 3.0, 12.0, 3.0].as_slice(), epsilon = 1e-13);
    let ti = polyconvex_invariants(GroupId::Ti, &kb, &std);
    assert_relative_eq!(ti.values[4..].as_ref(), [1.0, 1.0, 2.0, 2.0].as_slice(), epsilon = 1e-14);
    let tri = polyconvex_invariants(GroupId::Tri, &bundle(&shear()).unwrap(), &std);
    assert_relative_eq!(tri.values[3], 1.22, epsilon = 1e-14);
}

#[test]
fn relations_pass_at_seed_seven() {
    for g in [GroupId::Iso, GroupId::Cub, GroupId::Mon] {
        for r in verify_roundtrip(g, 1000, 7).unwrap() {
            assert!(r.pass, "{g} {:?}", r.direction);
        }
    }
}

fn one_node() -> NetworkParams {
    NetworkParams {
        spec: ArchitectureSpec::new(1, &[1], ConstraintMode::Unconstrained),
        layers: vec![Layer { weights: vec![1.0], biases: vec![0.0] }],
        output: vec![1.0],
        seed: 0,
    }
}

#[test]
fn one_node_network() {
    let p = one_node();
    assert_relative_eq!(forward(&p, &[0.0]).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
    assert_relative_eq!(forward(&p, &[40.0]).unwrap(), 40.0, epsilon = 1e-12);
    assert_relative_eq!(input_gradient(&p, &[0.0]).unwrap()[0], 0.5, epsilon = 1e-15);
    assert_relative_eq!(input_hessian(&p, &[0.0]).unwrap()[0][0], 0.25, epsilon = 1e-15);
    // flat order: W1, b1, w2
    let g = param_gradient_of_input_gradient(&p, &[0.0], &[1.0]).unwrap();
    assert_relative_eq!(g[0], 0.5, epsilon = 1e-15);
}

#[test]
fn model_oracles() {
    assert_relative_eq!(growth(0.01, 1.0).unwrap(), 9605.9601, max_relative = 1e-12);
    let counts: Vec<usize> = Variant::ALL
        .iter()
        .map(|&v| PannModel::build(v, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 0).unwrap().parameter_count())
        .collect();
    assert_eq!(counts, [464, 448, 272, 208]);
    for v in Variant::ALL {
        let m = PannModel::build(v, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 9).unwrap();
        assert!(m.stress(&Tensor2::identity()).unwrap().abs().max() <= 1e-8);
        assert!(m.potential(&Tensor2::identity()).unwrap().is_finite());
    }
}

#[test]
fn reference_materials_and_counterexample() {
    let id = Tensor2::identity();
    for m in [ReferenceMaterial::neo_hooke(1.0, 0.4), ReferenceMaterial::cubic_default()] {
        assert!(m.stress(&id).unwrap().abs().max() <= 1e-14);
    }
    let cub = ReferenceMaterial::cubic_default();
    let f = diag(1.1, 0.9, 1.05) * axis_rotation(&Vec3::new(1.0, 2.0, 0.5).normalize(), 0.3);
    let p = cub.stress(&f).unwrap();
    for q in group_elements(GroupId::Cub, &cub.frame).unwrap().elements {
        assert_relative_eq!(cub.stress(&(f * q.transpose())).unwrap() * q, p, epsilon = 1e-12);
    }
    for f in [id, shear(), diag(1.3, 0.8, 1.1)] {
        let v = ShearCoupling.tangent(&f).unwrap().rank_one(&Vec3::z(), &Vec3::new(1.0, -1.0, 0.0));
        assert_relative_eq!(v, -2.0, epsilon = 1e-12);
    }
}
