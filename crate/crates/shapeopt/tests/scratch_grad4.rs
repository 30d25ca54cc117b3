use shapeopt::fem::{Constraints, Dofs};
use shapeopt::flow::{
    assemble_linearized, solve_primal, FluidProperties, Linearization, SolverConfig,
};
use shapeopt::mesh::{channel_with_obstacle, BoundaryTag, ChannelSpec, Mesh, Obstacle};
use shapeopt::Vec2;

fn flat(dofs: &Dofs, st: &shapeopt::flow::FlowState) -> Vec<f64> {
    let mut x = vec![0.0; dofs.n_total()];
    for (n, v) in st.velocity.iter().enumerate() {
        x[dofs.vel_dof(n, 0)] = v.x;
        x[dofs.vel_dof(n, 1)] = v.y;
    }
    for (i, p) in st.pressure.iter().enumerate() {
        x[dofs.pressure_dof(i)] = *p;
    }
    x
}

fn design_vel_nodes(mesh: &Mesh, dofs: &Dofs) -> Vec<usize> {
    let mut set = std::collections::BTreeSet::new();
    for be in mesh.boundary_edges() {
        if be.tag != BoundaryTag::Design {
            continue;
        }
        let [a, b] = be.nodes;
        set.insert(a);
        set.insert(b);
        set.insert(dofs.edge_node(a, b).unwrap());
    }
    set.into_iter().collect()
}

/// -d . F via the nodal reaction.
fn reaction_drag_j(mesh: &Mesh, dofs: &Dofs, x: &[f64], props: &FluidProperties, v: &[Vec2]) -> f64 {
    let sys = assemble_linearized(mesh, dofs, props, v, Linearization::Picard);
    let r = sys.residual(x);
    let d = props.flow_direction();
    let mut f = 0.0;
    for n in design_vel_nodes(mesh, dofs) {
        f += d.x * -r[dofs.vel_dof(n, 0)] + d.y * -r[dofs.vel_dof(n, 1)];
    }
    -f
}

#[test]
fn discrete_adjoint_identity() {
    for target in [200usize, 800] {
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
        let primal = solve_primal(&mesh, &props, &cfg, None).unwrap();
        let x = flat(&dofs, &primal);
        println!("== target {target}: {} cells", mesh.cell_count());

        // Exact-transpose adjoint: A_newton^T with adjoint Dirichlet data.
        let newton =
            assemble_linearized(&mesh, &dofs, &props, &primal.velocity, Linearization::Newton);
        let mut tsys = shapeopt::fem::LinearSystem::new(dofs.n_total());
        for t in newton.triplets() {
            tsys.add(t.col, t.row, t.val);
        }
        let d = props.flow_direction();
        let mut bc = Constraints::none(dofs.n_total());
        // slip walls first, then inflow zero, then design -d
        for be in mesh.boundary_edges() {
            if be.tag == BoundaryTag::SlipWall {
                let [a, b] = be.nodes;
                for n in [a, b, dofs.edge_node(a, b).unwrap()] {
                    bc.set(dofs.vel_dof(n, 1), 0.0);
                }
            }
        }
        for be in mesh.boundary_edges() {
            let val = match be.tag {
                BoundaryTag::Inflow => Vec2::ZERO,
                BoundaryTag::Design => -d,
                _ => continue,
            };
            let [a, b] = be.nodes;
            for n in [a, b, dofs.edge_node(a, b).unwrap()] {
                bc.set(dofs.vel_dof(n, 0), val.x);
                bc.set(dofs.vel_dof(n, 1), val.y);
            }
        }
        tsys.apply_constraints(&bc);
        let (vhat, _) = tsys.solve(1e-13, 4).unwrap();

        let db = mesh.design_boundary().unwrap();
        let top = (0..db.len())
            .max_by(|&a, &b| {
                mesh.node(db.nodes[a]).y.partial_cmp(&mesh.node(db.nodes[b]).y).unwrap()
            })
            .unwrap();
        let tip = (0..db.len())
            .min_by(|&a, &b| {
                mesh.node(db.nodes[a]).x.partial_cmp(&mesh.node(db.nodes[b]).x).unwrap()
            })
            .unwrap();
        let shoulder = (0..db.len())
            .min_by_key(|&i| {
                let p = mesh.node(db.nodes[i]);
                ((p - Vec2::new(-0.3536, 0.3536)).norm() * 1e9) as i64
            })
            .unwrap();

        for i in [top, tip, shoulder] {
            let node = db.nodes[i];
            let mut u = vec![Vec2::ZERO; mesh.node_count()];
            u[node] = db.normals[i];

            // predicted: vhat^T d(A x)/dt by assembly FD at frozen x
            let delta = 1e-6;
            let r_at = |s: f64| -> Vec<f64> {
                let m = mesh.morph(&u, s).unwrap();
                let dd = Dofs::new(&m);
                let sys = assemble_linearized(&m, &dd, &props, &primal.velocity, Linearization::Picard);
                let r = sys.residual(&x);
                r.iter().map(|v| -v).collect() // A x
            };
            let rp = r_at(delta);
            let rm = r_at(-delta);
            let mut g = 0.0;
            for k in 0..dofs.n_total() {
                g += vhat[k] * (rp[k] - rm[k]) / (2.0 * delta);
            }

            // true FD with resolve, on the reaction objective
            let h = 1e-6;
            let fd = |s: f64| -> f64 {
                let m = mesh.morph(&u, s).unwrap();
                let dd = Dofs::new(&m);
                let st = solve_primal(&m, &props, &cfg, Some(&primal)).unwrap();
                let xx = flat(&dd, &st);
                reaction_drag_j(&m, &dd, &xx, &props, &st.velocity)
            };
            let jp_fd = (fd(h) - fd(-h)) / (2.0 * h);
            let rel = (g - jp_fd).abs() / jp_fd.abs().max(1e-30);
            println!(
                "  node {node:4} at ({:7.4},{:7.4}): g_disc={:12.6e} J'_fd={:12.6e} rel={:.4}%",
                mesh.node(node).x,
                mesh.node(node).y,
                g,
                jp_fd,
                100.0 * rel
            );
        }
    }
}
