//! Affine-invariant geometry on positive definite matrices: distance along a
//! geodesic, the exp/log round trip and parallel transport.

use riemmix::random::{random_spd, random_symmetric, seeded};
use riemmix::spd::{exp_map, geodesic, log_map, metric, parallel_transport};

fn main() {
    let mut rng = seeded(7);
    let (a, b) = (random_spd(4, &mut rng), random_spd(4, &mut rng));
    let v = log_map(&a, &b).unwrap();
    let dist = metric(&a, &v, &v).unwrap().sqrt();
    println!("distance between A and B: {dist:.6}");

    let back = exp_map(&a, &v).unwrap();
    println!("|exp_A(log_A B) - B| = {:.2e}", (back.matrix() - b.matrix()).amax());

    let mid = geodesic(&a, &b, 0.5).unwrap();
    let half = log_map(&a, &mid).unwrap();
    println!("midpoint sits at half the distance: {:.6}", metric(&a, &half, &half).unwrap().sqrt());

    let xi = random_symmetric(4, 1.0, &mut rng);
    let moved = parallel_transport(&a, &b, &xi).unwrap();
    println!(
        "transport keeps the norm: {:.12} vs {:.12}",
        metric(&a, &xi, &xi).unwrap().sqrt(),
        metric(&b, &moved, &moved).unwrap().sqrt()
    );
}
