# Empty __init__ file for tasks package
