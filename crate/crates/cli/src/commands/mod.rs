pub mod decode;
pub mod eval;
pub mod gen_data;
pub mod sweep;
pub mod train;
