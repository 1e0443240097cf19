"""Hamiltonian learning for trapped-ion Ising simulators"""
