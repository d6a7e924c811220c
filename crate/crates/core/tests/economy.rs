mod common;

use common::economy::run;
use slant_core::engine::EconomyConfig;

#[test]
fn default_economy_invariants_hold_over_random_play() {
    let t = run(1, EconomyConfig::default());
    assert!(t.context_hits > 50 && t.bonuses > 0 && t.collected > 0 && t.purchases > 0);
}

#[test]
fn invariants_hold_with_every_mode_unlocked_early() {
    let economy = EconomyConfig { coop_unlock_level: 1, critique_unlock_level: 2, ..EconomyConfig::default() };
    let t = run(2, economy);
    assert!(t.context_hits > 50 && t.bonuses > 0 && t.collected > 0);
}
