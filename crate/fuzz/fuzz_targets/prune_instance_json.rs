#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::prune::{is_feasible, solve_exact_with_budget, PruneInstance};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(inst) = PruneInstance::from_json(s) else { return };
    if inst.n_polyominoes() > 64 {
        return;
    }
    let model = inst.model();
    let sol = solve_exact_with_budget(&inst, 10_000);
    let picked: Vec<bool> = model.vars.iter().map(|v| sol.selected.binary_search(v).is_ok()).collect();
    assert!(is_feasible(&model.constraints, &picked));
});
