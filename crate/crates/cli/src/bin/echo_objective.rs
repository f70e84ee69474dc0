//! Reference objective server speaking the line-delimited JSON protocol,
//! installed alongside the main CLI for quick end-to-end smoke tests.

fn main() {
    planopt::subprocess::echo_objective_main()
}
