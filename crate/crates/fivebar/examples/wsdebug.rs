// Diagnostic dump of the workspace extraction pipeline.
use freefall_fivebar::collision::CollisionModel;
use freefall_fivebar::geometry::LegGeometry;
use freefall_fivebar::workspace::{extract_workspace, poly_eval};

fn main() {
    let geom = LegGeometry::default();
    let model = CollisionModel::default();
    let (ws, report) = extract_workspace(&geom, &model, 50);
    println!("report: {report:#?}");
    println!("phi_mh box: [{:.3}, {:.3}]", ws.phi_min[0], ws.phi_max[0]);
    println!("linear rows:");
    for row in &ws.linear {
        println!("  {:?} <= {:.3}", row.a, row.b);
    }
    if let Some(nl) = &ws.nonlinear {
        println!("poly: {:?}", nl.poly);
        println!("gates: {:?}", nl.gates);
        println!("g: {:?}", nl.g);
        println!("m     P5(m)   allowed12  gates(m)  allowed11");
        let mut m = ws.phi_min[0];
        while m <= ws.phi_max[0] + 1e-9 {
            let p = poly_eval(&nl.poly, m);
            let gate = nl.gates[0].eval(m) + nl.gates[1].eval(m);
            println!(
                "{m:+.2}  {p:+.3}  {:+.3}  {gate:+.3}  {:+.3}",
                nl.g[0] - p,
                nl.g[1] - gate
            );
            m += 0.1;
        }
    }
}
