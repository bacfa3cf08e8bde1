use wavecheck::harness::{fill_eoc, run_case, run_study, steps_for, CaseSpec, StudyConfig, StudyRow};
use wavecheck::operator::{SpdOperator, StatePair};
use wavecheck::problems::{ExactSolution, ExamplePreset, SampleRule, SineSeriesSolution, SineTerm};
use wavecheck::scheme::{FnSource, Formulation, ZeroSource};
use wavecheck::Result;

/// `u(t) = a(t) phi` with `A phi = lambda phi` and `a(t) = cos(2t) + t^2`,
/// driven by `f = (a'' + lambda a) phi`.
struct ForcedMode {
    mode: (u32, u32),
}

impl ForcedMode {
    fn a(t: f64) -> (f64, f64, f64) {
        ((2.0 * t).cos() + t * t, -2.0 * (2.0 * t).sin() + 2.0 * t, -4.0 * (2.0 * t).cos() + 2.0)
    }

    fn force(&self, op: &SpdOperator, t: f64) -> Result<wavecheck::operator::StateVector> {
        let lambda = op.mode_eigenvalue(self.mode.0, self.mode.1)?;
        let (a, _, a2) = Self::a(t);
        Ok(op.mode_vector(self.mode.0, self.mode.1)?.scaled(a2 + lambda * a))
    }
}

impl ExactSolution for ForcedMode {
    fn state(&self, op: &SpdOperator, t: f64) -> Result<StatePair> {
        let phi = op.mode_vector(self.mode.0, self.mode.1)?;
        let (a, a1, _) = Self::a(t);
        StatePair::new(phi.scaled(a), phi.scaled(a1))
    }
}

fn forced_rows(op: &SpdOperator, mode: (u32, u32), formulation: Formulation) -> Vec<StudyRow> {
    let exact = ForcedMode { mode };
    let source = FnSource::new(|op: &SpdOperator, t: f64| exact.force(op, t));
    let mut rows: Vec<StudyRow> = [0.05, 0.025, 0.0125]
        .iter()
        .enumerate()
        .map(|(level, &k)| {
            let (n_steps, k) = steps_for(1.0, k).unwrap();
            let spec = CaseSpec {
                level,
                h: None,
                k,
                n_steps,
                formulation,
                quad_points: 3,
                samples: SampleRule::default(),
                record_wall_time: false,
            };
            run_case(op, &exact, &source, &spec).unwrap().row
        })
        .collect();
    fill_eoc(&mut rows);
    rows
}

#[test]
fn forced_runs_are_reliable_and_second_order() {
    let cases = [
        (SpdOperator::fd_laplacian_1d(1.0, 15).unwrap(), (2, 0)),
        (SpdOperator::fd_laplacian_2d(0.5, 7).unwrap(), (1, 2)),
        (SpdOperator::spectral_sine(1.0, vec![(1, 1), (2, 1)]).unwrap(), (2, 1)),
    ];
    let formulations = [Formulation::LeapFrog, Formulation::Cosine1 { q1: 0.5 }, Formulation::Cosine2 { q1: 0.25 }];
    for (op, mode) in &cases {
        for formulation in formulations {
            let rows = forced_rows(op, *mode, formulation);
            for r in &rows {
                assert!(r.stable);
                assert!(r.is_reliable(), "{formulation:?} {mode:?}: iei_r {}", r.iei_r);
                assert!(r.quadrature_change() < 1e-9);
            }
            let last = rows.last().unwrap();
            for eoc in [last.eoc_e_r, last.eoc_e_l, last.eoc_eta1] {
                let eoc = eoc.unwrap();
                assert!((1.8..=2.2).contains(&eoc), "{formulation:?} {mode:?}: EOC {eoc}");
            }
        }
    }
}

#[test]
fn zero_amplitude_solution_gives_zero_columns() {
    let solution = SineSeriesSolution::new(1.0, vec![SineTerm { k: 1, j: 1, alpha: 0.0, beta: 0.0 }]).unwrap();
    let op = SpdOperator::spectral_sine(1.0, solution.modes()).unwrap();
    let spec = CaseSpec {
        level: 0,
        h: None,
        k: 0.05,
        n_steps: 20,
        formulation: Formulation::LeapFrog,
        quad_points: 3,
        samples: SampleRule::default(),
        record_wall_time: false,
    };
    let row = run_case(&op, &solution, &ZeroSource, &spec).unwrap().row;
    assert!(row.stable);
    for x in [row.sup_e_r, row.sup_e_l, row.eta1, row.iei, row.iei_r, row.energy_t, row.max_rho_u, row.max_rho_v] {
        assert_eq!(x, 0.0);
    }
}

#[test]
fn preset3_quadratic_rule_keeps_eoc_of_eta1_at_least_two() {
    let preset = ExamplePreset::preset3_quadratic();
    let cfg: StudyConfig = serde_json::from_value(serde_json::json!({
        "name": "p3q",
        "problem": { "preset": 3 },
        "operator": "spectral",
        "time_step": preset.time_step,
        "formulation": { "formulation": "leap_frog" },
        "record_wall_time": false,
    }))
    .unwrap();
    let study = run_study(&cfg).unwrap();
    for row in study.rows().iter().skip(1) {
        assert!(row.eoc_eta1.unwrap() >= 2.0, "level {}: {:?}", row.level, row.eoc_eta1);
        assert!(row.is_reliable());
    }
}

#[test]
fn errors_and_estimator_decrease_under_refinement() {
    for preset in [1, 2, 3] {
        let cfg: StudyConfig = serde_json::from_value(serde_json::json!({
            "name": format!("p{preset}"),
            "problem": { "preset": preset },
            "operator": "spectral",
            "formulation": { "formulation": "leap_frog" },
        }))
        .unwrap();
        let study = run_study(&cfg).unwrap();
        let rows = study.rows();
        for pair in rows.windows(2) {
            assert!(pair[1].sup_e_r < pair[0].sup_e_r);
            assert!(pair[1].sup_e_l < pair[0].sup_e_l);
            assert!(pair[1].eta1 < pair[0].eta1);
        }
        assert!(study.reliability_violation().is_none());
    }
}
