"""Physical constants (CODATA 2018, SI)."""

C0 = 299_792_458.0
HBAR = 1.054_571_817e-34
HBAR_EV = 6.582_119_569e-16
EV = 1.602_176_634e-19
