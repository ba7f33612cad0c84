//! Distributed Hamiltonian cycles in random graphs, simulated in the
//! CONGEST model.

pub mod dhc;
pub mod graph;
pub mod rotation;
pub mod runtime;
pub mod upcast;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/getting-started.md")]
    mod getting_started {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/rotation.md")]
    mod rotation {}
    #[doc = include_str!("../../../book/src/cycles.md")]
    mod cycles {}
    #[doc = include_str!("../../../book/src/upcast.md")]
    mod upcast {}
}
