use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};

#[test]
fn worst_cells() {
    let m = channel_with_obstacle(&ChannelSpec {
        length: 50.0, height: 10.0,
        obstacle: Obstacle::Circle { diameter: 1.0 },
        target_cells: 3000,
    }).unwrap();
    let q = m.quality();
    let mut idx: Vec<usize> = (0..m.cell_count()).collect();
    idx.sort_by(|&a, &b| q.aspect_ratio[b].partial_cmp(&q.aspect_ratio[a]).unwrap());
    for &c in idx.iter().take(12) {
        let t = m.triangles()[c];
        let ctr = (m.node(t[0]) + m.node(t[1]) + m.node(t[2])) / 3.0;
        println!("cell {c}: AR={:.2} ang={:.1} at ({:.3},{:.3}) r={:.3}",
            q.aspect_ratio[c], q.min_interior_angle[c], ctr.x, ctr.y, ctr.norm());
    }
}
