use tactile_explore::explorer::{explore_with, udrr, ExplorationConfig, IterationRecord, Observer, Policy, StopReason};
use tactile_explore::geometry::{PointCloud, Provenance, TriMesh, Vec3};
use tactile_explore::gpis::{augment_off_surface, fit, KernelSpec};
use tactile_explore::harness::builtin_scene;

#[derive(Default)]
struct Recorder {
    candidate_counts: Vec<usize>,
    fragments: Vec<PointCloud>,
    meshes: usize,
}

impl Observer for Recorder {
    fn candidates(&mut self, _touch: usize, candidates: &[Vec3]) {
        self.candidate_counts.push(candidates.len());
    }

    fn iteration(
        &mut self,
        _record: &IterationRecord,
        _mesh: &TriMesh,
        fragment: Option<&PointCloud>,
    ) -> tactile_explore::Result<()> {
        self.meshes += 1;
        self.fragments.extend(fragment.cloned());
        Ok(())
    }
}

#[test]
fn three_touch_run_reassembles() {
    let scene = builtin_scene("sphere50").unwrap();
    let shape = scene.shape.build().unwrap();
    let camera = scene.camera.build().unwrap();
    let spec = KernelSpec::rbf(0.09, 0.1).unwrap();
    let cfg = ExplorationConfig {
        max_touches: 3,
        udrr_threshold: 1e-6,
        kernel: Some(spec),
        seed: 2,
        ..ExplorationConfig::default()
    };
    let mut rec = Recorder::default();
    let report = explore_with(&shape, &camera, &scene.hand, &cfg, Policy::Bopt, &mut rec).unwrap();
    assert_eq!(report.stop, StopReason::TouchCap);
    assert_eq!(report.touch_count(), 3);
    assert_eq!(rec.meshes, 4);
    assert_eq!(rec.fragments.len(), 3);
    assert_eq!(rec.candidate_counts.len(), 3);
    for (k, r) in report.records.iter().enumerate().skip(1) {
        assert_eq!(r.candidates, rec.candidate_counts[k - 1]);
        assert_eq!(
            r.tactile_points,
            rec.fragments[..k].iter().map(PointCloud::len).sum::<usize>()
        );
    }
    for (k, f) in rec.fragments.iter().enumerate() {
        assert!(f.tags().iter().all(|t| *t == Provenance::Touch(k as u32 + 1)));
    }

    // The fused cloud is the visual points followed by each fragment in order.
    let visual = report.fused.filter_tag(Provenance::Visual);
    let mut rebuilt = visual.clone();
    for f in &rec.fragments {
        rebuilt.extend(f);
    }
    assert_eq!(rebuilt, report.fused);

    let refit = |cloud: &PointCloud| {
        let (p, v) = augment_off_surface(cloud).unwrap();
        fit(&p, &v, &spec).unwrap()
    };
    let visual_model = refit(&visual);
    let dist_max = tactile_explore::gpis::max_variance_gap(&visual_model, visual.points()).unwrap();
    assert!((dist_max - report.dist_max).abs() <= 1e-12 * dist_max);
    let again = udrr(&refit(&rebuilt), &rebuilt, dist_max).unwrap();
    assert!(
        (again - report.final_udrr()).abs() < 1e-12,
        "{again} vs {}",
        report.final_udrr()
    );
    assert!(report.final_chamfer() < report.initial_chamfer());
}

#[test]
fn identical_configs_give_identical_reports() {
    let scene = builtin_scene("mustard").unwrap();
    let shape = scene.shape.build().unwrap();
    let camera = scene.camera.build().unwrap();
    let cfg = ExplorationConfig {
        seed: 5,
        max_touches: 4,
        ..ExplorationConfig::default()
    };
    for policy in [Policy::Bopt, Policy::Random] {
        let a = explore_with(&shape, &camera, &scene.hand, &cfg, policy, &mut ()).unwrap();
        let b = explore_with(&shape, &camera, &scene.hand, &cfg, policy, &mut ()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.fused, b.fused);
    }
}
