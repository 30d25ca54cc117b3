use shapeopt::deform::PLaplaceConfig;
use shapeopt::flow::{FluidProperties, SolverConfig};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::optimizer::{run_augmented_lagrange, OptimizerConfig, SolverConfigs};
use shapeopt::sensitivity::AugLagState;
use shapeopt::Vec2;

#[test]
fn desk_scale_probe() {
    for p in [2.0f64, 4.0] {
        let mesh = channel_with_obstacle(&ChannelSpec {
            length: 50.0,
            height: 10.0,
            obstacle: Obstacle::Circle { diameter: 1.0 },
            target_cells: 3000,
        })
        .unwrap();
        let al = AugLagState::new(mesh.barycenter(), mesh.volume());
        let cfgs = SolverConfigs {
            props: FluidProperties {
                density: 1.0,
                viscosity: 1.0,
                inflow: Vec2::new(1.0, 0.0),
            },
            flow: SolverConfig::default(),
            plaplace: PLaplaceConfig::with_exponent(p),
        };
        let mut cfg = OptimizerConfig::new(al);
        cfg.max_total_steps = 30;
        let t0 = std::time::Instant::now();
        let (mesh, hist, al_final) = run_augmented_lagrange(mesh, &cfg, &cfgs, None).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let last = hist.rows.last().unwrap();
        println!(
            "p={p}: steps={} J/J0={:.5} drag {:.5}->{:.5} tip={:.1} a/b={:.3} maxAR={:.2} minAng={:.1} b={:.2e} c={:.2e} outer={} wall={dt:.1}s ({:.2} s/step)",
            last.step,
            last.j_over_j0,
            hist.rows[0].drag,
            last.drag,
            last.tip_angle,
            last.half_axis_ratio,
            last.max_aspect_ratio,
            last.min_angle,
            (mesh.barycenter() - al_final.target_barycenter).norm(),
            (mesh.volume() - al_final.target_volume).abs(),
            hist.outer_events.len(),
            dt / last.step.max(1) as f64,
        );
        for r in hist.rows.iter().step_by(5) {
            println!(
                "  step {:3}: J/J0={:.6} drag={:.6} gamma_inf={:.3} E_p={:.3e} J'={:.3e} a/b={:.3} maxAR={:.2}",
                r.step, r.j_over_j0, r.drag, r.gamma_inf, r.energy, r.j_prime, r.half_axis_ratio, r.max_aspect_ratio
            );
        }
        for e in &hist.outer_events {
            println!(
                "  outer {} at step {}: |b|={:.2e} |c|={:.2e} inflate=({},{}) lam_b=({:.2e},{:.2e}) lam_c={:.3}",
                e.outer_step, e.at_design_step, e.b_norm, e.c_abs, e.inflated_b, e.inflated_c, e.lambda_b.x, e.lambda_b.y, e.lambda_c
            );
        }
    }
}
