pub mod enumerate;
pub mod expand;
pub mod ising;
pub mod qcd;
pub mod replica;
