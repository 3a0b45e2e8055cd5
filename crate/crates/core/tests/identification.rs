use std::f64::consts::PI;
use std::path::PathBuf;

use electrosense::descriptors::{
    best_match, descriptor_of_mesh, match_descriptor, DescriptorSettings, Dictionary, DictionaryConfig, EntrySpec,
};
use electrosense::exec::{set_parallelism, Parallelism};
use electrosense::experiments::{run_identification_with, ExperimentPlan, Manifest, TargetSpec};
use electrosense::geometry::{apply_motion, make_shape_id, Material, RigidMotion, ShapeId};
use electrosense::Error;
use proptest::prelude::*;

fn small_settings() -> DescriptorSettings {
    DescriptorSettings {
        duration: 5.0,
        samples: 128,
        scales: vec![-1, 0],
    }
}

fn small_dictionary(panels: usize) -> Dictionary {
    let entries = [ShapeId::Circle, ShapeId::Ellipse, ShapeId::Flower, ShapeId::Ellipse2]
        .iter()
        .map(|&shape| EntrySpec {
            name: shape.name().into(),
            shape,
            material: None,
        })
        .collect();
    Dictionary::build(&DictionaryConfig {
        panels,
        settings: small_settings(),
        entries,
    })
    .unwrap()
}

fn scratch_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("electrosense-{}-{name}", std::process::id()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn descriptor_is_invariant_under_rigid_motion_and_dilation(
        tx in -0.5f64..0.5,
        ty in -0.5f64..0.5,
        scale in 0.5f64..2.0,
        angle in 0.0f64..2.0 * PI,
    ) {
        let shape = ShapeId::LetterL;
        let settings = small_settings();
        let mesh = make_shape_id(shape, 128).unwrap();
        let reference = descriptor_of_mesh(&mesh, &shape.material(), &settings).unwrap();
        let motion = RigidMotion::new([tx, ty], scale, angle).unwrap();
        let moved = descriptor_of_mesh(&apply_motion(&mesh, &motion).unwrap(), &shape.material(), &settings).unwrap();
        let rel = moved.distance(&reference).unwrap() / reference.norm();
        prop_assert!(rel < 1e-8, "{rel:e}");
    }
}

#[test]
fn descriptor_invariance_survives_remeshing() {
    let settings = small_settings();
    for shape in ShapeId::ALL {
        let reference = descriptor_of_mesh(&make_shape_id(shape, 128).unwrap(), &shape.material(), &settings).unwrap();
        let moved = apply_motion(&make_shape_id(shape, 256).unwrap(), &RigidMotion::reference_target()).unwrap();
        let d = descriptor_of_mesh(&moved, &shape.material(), &settings).unwrap();
        let rel = d.distance(&reference).unwrap() / reference.norm();
        assert!(rel < 1e-2, "{shape}: {rel:e}");
    }
}

#[test]
fn materials_separate_congruent_shapes() {
    let dict = small_dictionary(128);
    let ellipse2 = dict.entries.iter().find(|e| e.name == "ellipse2").unwrap();
    let ranking = match_descriptor(&ellipse2.descriptor, &dict).unwrap();
    assert_eq!(best_match(&ranking), Some("ellipse2"));
    assert_eq!(ranking[0].distance, 0.0);
    let to_ellipse = ranking.iter().find(|m| m.name == "ellipse").unwrap().distance;
    assert!(to_ellipse > 1e-2 * ellipse2.descriptor.norm(), "{to_ellipse}");
}

#[test]
fn archive_round_trips_and_detects_tampering() {
    let dict = small_dictionary(64);
    let path = scratch_path("dict.json");
    dict.save(&path).unwrap();
    assert_eq!(Dictionary::load(&path).unwrap(), dict);

    let mut tampered = dict.clone();
    tampered.entries[0].descriptor.values[3] += 1e-9;
    tampered.save(&path).unwrap();
    assert!(matches!(
        Dictionary::load(&path),
        Err(Error::FingerprintMismatch { .. })
    ));
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn descriptors_from_other_settings_are_rejected() {
    let dict = small_dictionary(64);
    let other = DescriptorSettings {
        samples: 256,
        ..small_settings()
    };
    let mesh = make_shape_id(ShapeId::Circle, 64).unwrap();
    let d = descriptor_of_mesh(&mesh, &ShapeId::Circle.material(), &other).unwrap();
    assert!(matches!(
        match_descriptor(&d, &dict),
        Err(Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn dictionary_fingerprint_depends_on_resolution() {
    let a = small_dictionary(64);
    let b = small_dictionary(96);
    assert_eq!(a.settings_fingerprint, b.settings_fingerprint);
    assert_ne!(a.fingerprint, b.fingerprint);
}

fn small_plan(dict: &Dictionary) -> ExperimentPlan {
    ExperimentPlan {
        name: "small".into(),
        targets: vec![TargetSpec::new(ShapeId::Circle), TargetSpec::new(ShapeId::Ellipse)],
        apertures: vec![PI / 4.0],
        noise_levels: vec![0.0, 0.5],
        trials: 3,
        scale_sets: vec![vec![-1, 0], vec![-1]],
        seed_base: 11,
        simulation_panels: 128,
        dictionary: DictionaryConfig {
            panels: dict.panels,
            settings: dict.settings.clone(),
            entries: dict
                .entries
                .iter()
                .map(|e| EntrySpec {
                    name: e.name.clone(),
                    shape: e.shape,
                    material: Some(e.material),
                })
                .collect(),
        },
        ..Default::default()
    }
}

#[test]
fn experiments_are_reproducible_across_modes_and_replays() {
    let dict = small_dictionary(64);
    let plan = small_plan(&dict);
    let first = run_identification_with(&plan, &dict).unwrap().report;
    assert_eq!(first.rows.len(), 2 * 2 * 2);
    assert_eq!(first.random_guess, 0.25);
    for row in first.rows.iter().filter(|r| r.noise_level == 0.0) {
        assert_eq!(
            row.successes, 3,
            "{} {:?} {:?}",
            row.target, row.scales, row.mean_distance
        );
    }

    set_parallelism(Parallelism::Sequential);
    let sequential = run_identification_with(&plan, &dict);
    set_parallelism(Parallelism::Parallel);
    assert_eq!(sequential.unwrap().report, first);

    let manifest: Manifest =
        serde_json::from_str(&serde_json::to_string(&Manifest::new(&plan, &first)).unwrap()).unwrap();
    let replay = run_identification_with(&manifest.plan, &dict).unwrap().report;
    assert_eq!(
        serde_json::to_string(&replay).unwrap(),
        serde_json::to_string(&first).unwrap()
    );

    let reseeded = ExperimentPlan {
        seed_base: 12,
        ..plan.clone()
    };
    let other = run_identification_with(&reseeded, &dict).unwrap().report;
    assert_ne!(other.plan_fingerprint, first.plan_fingerprint);
    let noisy = |r: &electrosense::experiments::ExperimentReport| {
        r.rows
            .iter()
            .filter(|x| x.noise_level > 0.0)
            .map(|x| x.mean_distance.clone())
            .collect::<Vec<_>>()
    };
    assert_ne!(noisy(&other), noisy(&first));
}

#[test]
fn mismatched_dictionary_is_rejected() {
    let dict = small_dictionary(64);
    let mut plan = small_plan(&dict);
    plan.dictionary.settings.samples = 256;
    assert!(matches!(
        run_identification_with(&plan, &dict),
        Err(Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn unknown_target_label_is_rejected() {
    let dict = small_dictionary(64);
    let mut plan = small_plan(&dict);
    plan.targets.push(TargetSpec {
        name: "square".into(),
        shape: ShapeId::Square,
        material: Some(Material::new(3.0, 1.0).unwrap()),
        motion: RigidMotion::identity(),
    });
    assert!(plan.validate().is_err());
}
