//! Structure texture retrieval, base-color assignment and per-object detail
//! stylization.

pub mod base_colors;
pub mod detail;
pub mod field;
pub mod library;
pub mod structure;

pub use base_colors::{
    assign_base_colors, BaseColorConfig, BaseColorRun, BaseColorStep, BaseColorTable,
};
pub use detail::{
    compose_colors, displaced_mesh, eval_final_colors, train_lnsf, train_lnsf_with_displacement,
    ComposeMode, DetailConfig, DetailStep, LnsfTrainer, ObjectGeometry, TrainedField,
};
pub use field::{FieldInputs, FieldSpec, Lnsf};
pub use library::{Texture, TextureEntry, TextureLibrary};
pub use structure::{
    render_structure, retrieve_structure_textures, score_structure_candidate, structure_camera,
    StructureAssignment, DEFAULT_CANDIDATES,
};

/// `"{text}, {style} style"`, or `text` alone when the style is blank.
pub fn compose_style_prompt(text: &str, style: &str) -> String {
    let style = style.trim();
    if style.is_empty() {
        text.to_string()
    } else {
        format!("{text}, {style} style")
    }
}
