//! A two-turn guided session with the offline mock model: an aggressive
//! request on ice, then a request to drive more carefully.

use apsc_core::guidance::{guided_base, guided_turn, MockBackend, PlanConfig, SessionState};
use apsc_core::scenario::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = guided_base(RoadClass::Icy);
    let mut session = SessionState::new("mock");
    for instruction in ["Drive aggressively, the road is icy.", "Now be more careful."] {
        let turn = guided_turn(&mut session, instruction, &MockBackend, &PlanConfig::default(), &base, 7)?;
        let e = &turn.plan.executables;
        println!("> {instruction}");
        println!("  e_max={} mu_0={} sigma_0={} bar_sigma={}", e.e_max, e.mu_0, e.sigma_0, e.bar_sigma);
        println!("  {}", e.rationale);
        println!("  {}", turn.digest.to_line());
    }
    Ok(())
}
