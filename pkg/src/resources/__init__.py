# Resources module initialization