pub mod derive;
pub mod games;
pub mod histories;
pub mod lln;
pub mod nogo;
pub mod simulate;
