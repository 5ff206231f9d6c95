pub mod forms;
pub mod immersion;
pub mod homology;
pub mod jacobi;
pub mod linalg;
pub mod mesh;
pub mod optimize;
pub mod ricci;
pub mod tmesh;
