"""Physical constants. Energies are carried as E/h in MHz throughout."""

MUB_MHZ_PER_T = 13996.2449  # Bohr magneton / h
KB_MHZ_PER_K = 20836.619  # Boltzmann constant / h

# CGS-emu molar susceptibility: N_A * mu_B [erg/G] per mole
AVOGADRO = 6.02214076e23
MUB_ERG_PER_G = 9.2740100783e-21
KB_ERG_PER_K = 1.380649e-16
NA_MUB_EMU = AVOGADRO * MUB_ERG_PER_G  # emu/mol for one mu_B per molecule
GAUSS_PER_TESLA = 1.0e4

# N_A mu_B^2 / (3 k_B) in cm^3 K / mol; Curie constant is this times g^2 S(S+1)
CURIE_PREFACTOR = AVOGADRO * MUB_ERG_PER_G**2 / (3.0 * KB_ERG_PER_K)
