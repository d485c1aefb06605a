//! Krauss (HDV) and IDM (CAV) followers approaching a stopped obstacle, plus
//! the spacing each model keeps at cruising speed.

use cav_nrc::dynamics::{equilibrium_gap, idm_step, krauss_step, IdmParams, KraussParams, LeaderView};

fn main() {
    let krauss = KraussParams { sigma: 0.0, ..Default::default() };
    let idm = IdmParams::default();
    let limit = 13.89;

    // Both start at the limit, 120 m behind a stopped vehicle.
    let (mut xk, mut vk) = (0.0, limit);
    let (mut xi, mut vi) = (0.0, limit);
    let obstacle = 120.0;
    println!("  t  krauss_gap krauss_v   idm_gap   idm_v");
    for t in 0..20 {
        let gk = obstacle - xk - krauss.min_gap;
        let gi = obstacle - xi;
        println!("{t:3} {:10.2} {:8.2} {:9.2} {:7.2}", obstacle - xk, vk, gi, vi);
        vk = krauss_step(vk, Some(LeaderView::new(0.0, gk)), limit, 1.0, 0.0, &krauss);
        vi = idm_step(vi, Some(LeaderView::new(0.0, gi)), limit, 1.0, &idm).expect("positive gap");
        xk += vk;
        xi += vi;
    }

    println!("\nspace per vehicle at steady speed (gap + length):");
    for v in [2.0, 6.0, 10.0, 12.0] {
        let idm_space = equilibrium_gap(v, &idm, limit).unwrap() + idm.length;
        let krauss_space = v * krauss.tau + krauss.min_gap + krauss.length;
        println!("  v={v:4.1} m/s  IDM {idm_space:6.2} m  Krauss {krauss_space:6.2} m");
    }
}
