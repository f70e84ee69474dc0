//! Reference objective server speaking the line-delimited JSON protocol.

fn main() {
    planopt::subprocess::echo_objective_main()
}
