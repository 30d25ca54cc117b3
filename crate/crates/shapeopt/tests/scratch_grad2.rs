use shapeopt::adjoint::solve_adjoint;
use shapeopt::deform::solve_laplace;
use shapeopt::fem::Dofs;
use shapeopt::flow::{objective, solve_primal, FluidProperties, SolverConfig};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::sensitivity::{shape_derivative, shape_sensitivity, AugLagState, SensitivityField};
use shapeopt::Vec2;

#[test]
fn smooth_field_gradient_check() {
    for target in [200usize, 800, 3000] {
        let mesh = channel_with_obstacle(&ChannelSpec {
            length: 50.0,
            height: 10.0,
            obstacle: Obstacle::Circle { diameter: 1.0 },
            target_cells: target,
        })
        .unwrap();
        let props = FluidProperties {
            density: 1.0,
            viscosity: 1.0,
            inflow: Vec2::new(1.0, 0.0),
        };
        let cfg = SolverConfig {
            nonlinear_tol: 1e-12,
            max_picard: 60,
            ..SolverConfig::default()
        };
        let dofs = Dofs::new(&mesh);
        let al = AugLagState::new(mesh.barycenter(), mesh.volume());
        let primal = solve_primal(&mesh, &props, &cfg, None).unwrap();
        let adj = solve_adjoint(&mesh, &primal, &props, &cfg).unwrap();
        let gamma = shape_sensitivity(&mesh, &dofs, &primal, &adj, &props, &al).unwrap();
        let db = mesh.design_boundary().unwrap();
        println!("== target {target}: {} cells", mesh.cell_count());

        // Smooth test fields: gamma-like loads extended into the domain by
        // the Laplace solver (the same construction the optimizer uses).
        let fields: Vec<(&str, SensitivityField)> = vec![
            (
                "actual gamma",
                gamma.clone(),
            ),
            (
                "cos(2 theta)",
                SensitivityField {
                    nodes: db.nodes.clone(),
                    gamma: db
                        .nodes
                        .iter()
                        .map(|&n| {
                            let p = mesh.node(n);
                            let th = p.y.atan2(p.x);
                            (2.0 * th).cos()
                        })
                        .collect(),
                },
            ),
            (
                "uniform inflate",
                SensitivityField {
                    nodes: db.nodes.clone(),
                    gamma: vec![1.0; db.len()],
                },
            ),
        ];
        for (name, g) in &fields {
            let u = solve_laplace(&mesh, g).unwrap();
            let jp_adjoint = shape_derivative(&mesh, &gamma, &u.u).unwrap();
            let fd = |s: f64| -> f64 {
                let m = mesh.morph(&u.u, s).unwrap();
                let d = Dofs::new(&m);
                let st = solve_primal(&m, &props, &cfg, Some(&primal)).unwrap();
                let (j, _) = objective(&m, &d, &st, &props, &al);
                j
            };
            for h in [1e-5, 1e-6] {
                let jp_fd = (fd(h) - fd(-h)) / (2.0 * h);
                let rel = (jp_adjoint - jp_fd).abs() / jp_fd.abs().max(1e-30);
                println!(
                    "  field {name:16} h={h:<8.0e} J'_adj={jp_adjoint:12.6e} J'_fd={jp_fd:12.6e} rel={:.3}%",
                    100.0 * rel
                );
            }
        }
    }
}
