//! Integrated electricity and district-heating pricing with building comfort.

pub mod bilevel;
pub mod building;
pub mod data;
pub mod io;
pub mod network;
pub mod oracle;
pub mod scenario;
