//! Packet-level simulator of a server-centric PON data-centre testbed:
//! topology model and builders, rack addressing, routing (including AWGR
//! wavelength routing and TDM upstream grants), a deterministic
//! discrete-event engine and the probe methodology (ping, traceroute, CBR
//! flows, processing-delay calibration, scaling comparison).

pub mod addressing;
pub mod par;
pub mod probes;
pub mod routing;
pub mod simcore;
pub mod topo;

pub use par::Execution;
